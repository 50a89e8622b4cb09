//! Explicit variational time steppers.
//!
//! [`Problem::euler_a_step`] and [`Problem::euler_b_step`] are the two
//! first-order symplectic Euler variants; they are mutually adjoint, so
//! `euler_b_step(euler_a_step(s, dt), -dt) == s` up to round-off.
//! [`Problem::step_f10`] and [`Problem::step_f01`] compose them over half
//! steps into symmetric second-order methods.
//!
//! Dirichlet data enter as prescribed values together with their time
//! derivatives. The A-variant samples rates at the start of a step and
//! positions at its end; the B-variant samples everything at the end.
//! Every step takes the input state by reference and returns a new one, so a
//! failure never leaves a half-updated state behind.

use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;
use thiserror::Error;

use crate::assembly::{
    self, all_kinematics, check_model, deformation_gradients, entropy_flux_divergence,
    internal_force, lumped_mass, solve_nodal_temperature, thermal_momentum, AssemblyError,
};
use crate::material::{Material, ThermoElasticMaterial};
use crate::mesh::{BoundaryLabels, Mesh, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("non-finite {field} at node {node}")]
    NonFinite { field: &'static str, node: usize },
    #[error("invalid time step {0}")]
    InvalidTimeStep(f64),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("stable time step estimate requires a linear model; supply the time step explicitly")]
    UnsupportedEstimate,
}

/// Time-dependent field over reference positions.
pub type SpaceTimeFn<T> = Arc<dyn Fn(&Point, f64) -> T + Send + Sync>;

/// A prescribed field together with its time derivative.
#[derive(Clone)]
pub struct Prescribed<T> {
    pub value: SpaceTimeFn<T>,
    pub rate: SpaceTimeFn<T>,
}

impl<T> Prescribed<T> {
    pub fn new<V, R>(value: V, rate: R) -> Self
    where
        V: Fn(&Point, f64) -> T + Send + Sync + 'static,
        R: Fn(&Point, f64) -> T + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            rate: Arc::new(rate),
        }
    }
}

/// Boundary data and loads. Dirichlet values apply to the nodes of facets
/// carrying the matching label; tractions and entropy influxes apply to
/// facets labelled [`BoundaryLabels::TRACTION`] and
/// [`BoundaryLabels::ENTROPY_FLUX`].
///
/// Everything switches off once `active_until` has passed; the formerly
/// constrained nodes then evolve freely.
#[derive(Clone, Default)]
pub struct BoundaryConditions {
    pub motion: Option<Prescribed<Point>>,
    pub thermal: Option<Prescribed<f64>>,
    pub traction: Option<SpaceTimeFn<Point>>,
    pub entropy_influx: Option<SpaceTimeFn<f64>>,
    /// Uniform body force per unit mass.
    pub body_force: Vector3<f64>,
    /// Uniform entropy source per unit mass.
    pub entropy_source: f64,
    pub active_until: Option<f64>,
}

impl fmt::Debug for BoundaryConditions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryConditions")
            .field("motion", &self.motion.is_some())
            .field("thermal", &self.thermal.is_some())
            .field("traction", &self.traction.is_some())
            .field("entropy_influx", &self.entropy_influx.is_some())
            .field("body_force", &self.body_force)
            .field("entropy_source", &self.entropy_source)
            .field("active_until", &self.active_until)
            .finish()
    }
}

impl BoundaryConditions {
    /// No constraints and no loads.
    pub fn isolated() -> Self {
        Self::default()
    }

    /// Whether the data apply over a step ending at `t`.
    pub fn active_at(&self, t: f64) -> bool {
        match self.active_until {
            None => true,
            Some(end) => t <= end + 1e-9 * end.abs().max(1.0),
        }
    }

    /// Whether any load contributes to the external potential.
    pub fn has_loads(&self) -> bool {
        self.traction.is_some()
            || self.entropy_influx.is_some()
            || self.body_force != Vector3::zeros()
            || self.entropy_source != 0.0
    }
}

/// Discrete state at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    /// Nodal positions, zero beyond the mesh dimension.
    pub motion: Vec<Point>,
    /// Nodal thermal displacements.
    pub thermal: Vec<f64>,
    pub momentum: Vec<Point>,
    pub entropy_momentum: Vec<f64>,
    /// Nodal temperatures consistent with `entropy_momentum`.
    pub temperature: Vec<f64>,
}

impl State {
    pub fn n_nodes(&self) -> usize {
        self.motion.len()
    }

    pub fn velocities(&self, mass: &[f64]) -> Vec<Point> {
        self.momentum
            .iter()
            .zip(mass)
            .map(|(p, m)| p / *m)
            .collect()
    }

    fn check_finite(&self) -> Result<(), StepError> {
        let vectors = [("position", &self.motion), ("momentum", &self.momentum)];
        for (field, values) in vectors {
            if let Some(node) = values.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
                return Err(StepError::NonFinite { field, node });
            }
        }
        let scalars = [
            ("thermal displacement", &self.thermal),
            ("entropy momentum", &self.entropy_momentum),
            ("temperature", &self.temperature),
        ];
        for (field, values) in scalars {
            if let Some(node) = values.iter().position(|v| !v.is_finite()) {
                return Err(StepError::NonFinite { field, node });
            }
        }
        Ok(())
    }
}

/// Which integrator a driver should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    F10,
    F01,
    EulerA,
    EulerB,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::F10 => "f10",
            Scheme::F01 => "f01",
            Scheme::EulerA => "euler-a",
            Scheme::EulerB => "euler-b",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f10" => Ok(Scheme::F10),
            "f01" => Ok(Scheme::F01),
            "euler-a" | "a" => Ok(Scheme::EulerA),
            "euler-b" | "b" => Ok(Scheme::EulerB),
            other => Err(format!(
                "unknown integrator `{other}` (expected f10, f01, euler-a or euler-b)"
            )),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Mesh, material and boundary data, with the lumped mass and constrained
/// node sets precomputed.
pub struct Problem<M: ThermoElasticMaterial> {
    mesh: Mesh,
    model: M,
    bc: BoundaryConditions,
    mass: Vec<f64>,
    motion_fixed: Vec<bool>,
    thermal_fixed: Vec<bool>,
}

/// Intermediate result of a raw Euler step, before the temperature cache is
/// refreshed.
struct RawStep {
    state: State,
    rates: Vec<f64>,
    thermal_active: bool,
}

impl<M: ThermoElasticMaterial> Problem<M> {
    pub fn new(mesh: Mesh, model: M, bc: BoundaryConditions) -> Result<Self, StepError> {
        check_model(&mesh, &model)?;
        let motion_fixed = mesh.labeled_nodes(BoundaryLabels::MECH_DIRICHLET);
        let thermal_fixed = mesh.labeled_nodes(BoundaryLabels::THERMAL_DIRICHLET);
        let pairs = [
            (bc.motion.is_some(), BoundaryLabels::MECH_DIRICHLET),
            (bc.thermal.is_some(), BoundaryLabels::THERMAL_DIRICHLET),
            (bc.traction.is_some(), BoundaryLabels::TRACTION),
            (bc.entropy_influx.is_some(), BoundaryLabels::ENTROPY_FLUX),
        ];
        for (given, label) in pairs {
            if given != mesh.has_label(label) {
                return Err(StepError::InvalidProblem(if given {
                    format!("boundary data given but no facet is labelled {label}")
                } else {
                    format!("facets labelled {label} but no boundary data given")
                }));
            }
        }
        let mass = lumped_mass(&mesh, &model);
        Ok(Self {
            mesh,
            model,
            bc,
            mass,
            motion_fixed,
            thermal_fixed,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn boundary_conditions(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn motion_fixed(&self) -> &[bool] {
        &self.motion_fixed
    }

    pub fn thermal_fixed(&self) -> &[bool] {
        &self.thermal_fixed
    }

    fn motion_bc(&self, t: f64) -> Option<&Prescribed<Point>> {
        self.bc.motion.as_ref().filter(|_| self.bc.active_at(t))
    }

    fn thermal_bc(&self, t: f64) -> Option<&Prescribed<f64>> {
        self.bc.thermal.as_ref().filter(|_| self.bc.active_at(t))
    }

    fn pad(&self, mut v: Point) -> Point {
        v.iter_mut().skip(self.mesh.dim()).for_each(|c| *c = 0.0);
        v
    }

    /// Nodal external forces for a step whose load window is decided at
    /// `window_end` and whose data are sampled at `t`.
    pub fn external_force(&self, t: f64, window_end: f64) -> Vec<Point> {
        if !self.bc.active_at(window_end) {
            return vec![Point::zeros(); self.mesh.n_nodes()];
        }
        let traction = self.bc.traction.as_ref();
        assembly::external_force(&self.mesh, &self.model, &self.bc.body_force, |x| {
            traction.map_or(Point::zeros(), |f| f(x, t))
        })
    }

    /// Nodal entropy sources, with the same conventions as
    /// [`external_force`](Self::external_force).
    pub fn entropy_source(&self, t: f64, window_end: f64) -> Vec<f64> {
        if !self.bc.active_at(window_end) {
            return vec![0.0; self.mesh.n_nodes()];
        }
        let influx = self.bc.entropy_influx.as_ref();
        assembly::entropy_source(&self.mesh, &self.model, self.bc.entropy_source, |x| {
            influx.map_or(0.0, |f| f(x, t))
        })
    }

    /// Builds the initial state from nodal positions, velocities, thermal
    /// displacements and temperatures. Nodes constrained at `t = 0` take
    /// their boundary values instead.
    pub fn initialize(
        &self,
        motion: &[Point],
        velocity: &[Point],
        thermal: &[f64],
        temperature: &[f64],
    ) -> Result<State, StepError> {
        let n = self.mesh.n_nodes();
        for (field, len) in [
            ("motion", motion.len()),
            ("velocity", velocity.len()),
            ("thermal displacement", thermal.len()),
            ("temperature", temperature.len()),
        ] {
            assembly::check_len(field, n, len)?;
        }
        let coords = self.mesh.coords();
        let mut motion: Vec<Point> = motion.iter().map(|&x| self.pad(x)).collect();
        let mut velocity: Vec<Point> = velocity.iter().map(|&v| self.pad(v)).collect();
        let mut thermal = thermal.to_vec();
        let mut temperature = temperature.to_vec();
        if let Some(bc) = self.motion_bc(0.0) {
            for a in (0..n).filter(|&a| self.motion_fixed[a]) {
                motion[a] = self.pad((bc.value)(&coords[a], 0.0));
                velocity[a] = self.pad((bc.rate)(&coords[a], 0.0));
            }
        }
        if let Some(bc) = self.thermal_bc(0.0) {
            for a in (0..n).filter(|&a| self.thermal_fixed[a]) {
                thermal[a] = (bc.value)(&coords[a], 0.0);
                temperature[a] = (bc.rate)(&coords[a], 0.0);
            }
        }
        let momentum = velocity
            .iter()
            .zip(&self.mass)
            .map(|(v, m)| *m * v)
            .collect();
        let grads = deformation_gradients(&self.mesh, &motion)?;
        let entropy_momentum =
            assembly::thermal_momenta(&self.mesh, &self.model, &grads, &temperature)?;
        let state = State {
            time: 0.0,
            motion,
            thermal,
            momentum,
            entropy_momentum,
            temperature,
        };
        state.check_finite()?;
        Ok(state)
    }

    fn check_step(&self, state: &State, dt: f64) -> Result<(), StepError> {
        if !dt.is_finite() || dt == 0.0 {
            return Err(StepError::InvalidTimeStep(dt));
        }
        let n = self.mesh.n_nodes();
        assembly::check_len("motion", n, state.motion.len())?;
        assembly::check_len("thermal displacement", n, state.thermal.len())?;
        assembly::check_len("momentum", n, state.momentum.len())?;
        assembly::check_len("entropy momentum", n, state.entropy_momentum.len())?;
        assembly::check_len("temperature", n, state.temperature.len())?;
        state.check_finite()
    }

    fn euler_a_raw(&self, s: &State, dt: f64) -> Result<RawStep, StepError> {
        let mesh = &self.mesh;
        let coords = mesh.coords();
        let (t0, t1) = (s.time, s.time + dt);
        let window = t0.max(t1);
        let motion_bc = self.motion_bc(window);
        let thermal_bc = self.thermal_bc(window);

        let kin = all_kinematics(mesh, &s.motion, &s.thermal)?;
        let grads: Vec<_> = kin.iter().map(|k| k.deformation).collect();
        let flux = entropy_flux_divergence(mesh, &self.model, &kin)?;
        let source = self.entropy_source(t0, window);

        let n = mesh.n_nodes();
        let mut rates = vec![0.0; n];
        let mut thermal = vec![0.0; n];
        let mut entropy_momentum = vec![0.0; n];
        for a in 0..n {
            match thermal_bc.filter(|_| self.thermal_fixed[a]) {
                Some(bc) => {
                    rates[a] = (bc.rate)(&coords[a], t0);
                    thermal[a] = (bc.value)(&coords[a], t1);
                }
                None => {
                    entropy_momentum[a] = s.entropy_momentum[a] + dt * (flux[a] + source[a]);
                    rates[a] =
                        solve_nodal_temperature(mesh, &self.model, &grads, a, entropy_momentum[a])?;
                    thermal[a] = s.thermal[a] + dt * rates[a];
                }
            }
        }

        let force = internal_force(mesh, &self.model, &kin, &rates)?;
        let load = self.external_force(t0, window);
        let mut motion = vec![Point::zeros(); n];
        let mut momentum = vec![Point::zeros(); n];
        for a in 0..n {
            match motion_bc.filter(|_| self.motion_fixed[a]) {
                Some(bc) => {
                    motion[a] = self.pad((bc.value)(&coords[a], t1));
                    momentum[a] = self.mass[a] * self.pad((bc.rate)(&coords[a], t1));
                }
                None => {
                    momentum[a] = s.momentum[a] - dt * (force[a] - load[a]);
                    motion[a] = s.motion[a] + dt * momentum[a] / self.mass[a];
                }
            }
        }

        if let Some(bc) = thermal_bc {
            let grads = deformation_gradients(mesh, &motion)?;
            for a in (0..n).filter(|&a| self.thermal_fixed[a]) {
                let theta = (bc.rate)(&coords[a], t1);
                entropy_momentum[a] = thermal_momentum(mesh, &self.model, &grads, a, theta)?;
                rates[a] = theta;
            }
        }

        Ok(RawStep {
            state: State {
                time: t1,
                motion,
                thermal,
                momentum,
                entropy_momentum,
                temperature: s.temperature.clone(),
            },
            rates,
            thermal_active: thermal_bc.is_some(),
        })
    }

    fn euler_b_raw(&self, s: &State, dt: f64) -> Result<RawStep, StepError> {
        let mesh = &self.mesh;
        let coords = mesh.coords();
        let (t0, t1) = (s.time, s.time + dt);
        let window = t0.max(t1);
        let motion_bc = self.motion_bc(window);
        let thermal_bc = self.thermal_bc(window);
        let n = mesh.n_nodes();

        let motion: Vec<Point> = (0..n)
            .map(|a| match motion_bc.filter(|_| self.motion_fixed[a]) {
                Some(bc) => self.pad((bc.value)(&coords[a], t1)),
                None => s.motion[a] + dt * s.momentum[a] / self.mass[a],
            })
            .collect();
        let grads = deformation_gradients(mesh, &motion)?;

        let mut rates = vec![0.0; n];
        let mut thermal = vec![0.0; n];
        for a in 0..n {
            match thermal_bc.filter(|_| self.thermal_fixed[a]) {
                Some(bc) => {
                    rates[a] = (bc.rate)(&coords[a], t1);
                    thermal[a] = (bc.value)(&coords[a], t1);
                }
                None => {
                    rates[a] = solve_nodal_temperature(
                        mesh,
                        &self.model,
                        &grads,
                        a,
                        s.entropy_momentum[a],
                    )?;
                    thermal[a] = s.thermal[a] + dt * rates[a];
                }
            }
        }

        let kin = all_kinematics(mesh, &motion, &thermal)?;
        let force = internal_force(mesh, &self.model, &kin, &rates)?;
        let load = self.external_force(t1, window);
        let flux = entropy_flux_divergence(mesh, &self.model, &kin)?;
        let source = self.entropy_source(t1, window);

        let mut momentum = vec![Point::zeros(); n];
        let mut entropy_momentum = vec![0.0; n];
        for a in 0..n {
            momentum[a] = match motion_bc.filter(|_| self.motion_fixed[a]) {
                Some(bc) => self.mass[a] * self.pad((bc.rate)(&coords[a], t1)),
                None => s.momentum[a] - dt * (force[a] - load[a]),
            };
            entropy_momentum[a] = if thermal_bc.is_some() && self.thermal_fixed[a] {
                thermal_momentum(mesh, &self.model, &grads, a, rates[a])?
            } else {
                s.entropy_momentum[a] + dt * (flux[a] + source[a])
            };
        }

        Ok(RawStep {
            state: State {
                time: t1,
                motion,
                thermal,
                momentum,
                entropy_momentum,
                temperature: s.temperature.clone(),
            },
            rates,
            thermal_active: thermal_bc.is_some(),
        })
    }

    /// Recovers nodal temperatures from thermal momenta. Constrained nodes
    /// keep the prescribed rate.
    fn finish(&self, raw: RawStep) -> Result<State, StepError> {
        let RawStep {
            mut state,
            rates,
            thermal_active,
        } = raw;
        let grads = deformation_gradients(&self.mesh, &state.motion)?;
        for a in 0..self.mesh.n_nodes() {
            state.temperature[a] = if thermal_active && self.thermal_fixed[a] {
                rates[a]
            } else {
                solve_nodal_temperature(
                    &self.mesh,
                    &self.model,
                    &grads,
                    a,
                    state.entropy_momentum[a],
                )?
            };
        }
        state.check_finite()?;
        Ok(state)
    }

    /// One step of the first-order symplectic Euler-A method.
    pub fn euler_a_step(&self, state: &State, dt: f64) -> Result<State, StepError> {
        self.check_step(state, dt)?;
        let raw = self.euler_a_raw(state, dt)?;
        self.finish(raw)
    }

    /// One step of the first-order symplectic Euler-B method.
    pub fn euler_b_step(&self, state: &State, dt: f64) -> Result<State, StepError> {
        self.check_step(state, dt)?;
        let raw = self.euler_b_raw(state, dt)?;
        self.finish(raw)
    }

    /// Second-order step: Euler-A over the first half, Euler-B over the
    /// second.
    pub fn step_f10(&self, state: &State, dt: f64) -> Result<State, StepError> {
        self.check_step(state, dt)?;
        let half = self.euler_a_raw(state, 0.5 * dt)?;
        half.state.check_finite()?;
        let mut raw = self.euler_b_raw(&half.state, 0.5 * dt)?;
        raw.state.time = state.time + dt;
        self.finish(raw)
    }

    /// Second-order step with the halves in the opposite order.
    pub fn step_f01(&self, state: &State, dt: f64) -> Result<State, StepError> {
        self.check_step(state, dt)?;
        let half = self.euler_b_raw(state, 0.5 * dt)?;
        half.state.check_finite()?;
        let mut raw = self.euler_a_raw(&half.state, 0.5 * dt)?;
        raw.state.time = state.time + dt;
        self.finish(raw)
    }

    pub fn step(&self, scheme: Scheme, state: &State, dt: f64) -> Result<State, StepError> {
        match scheme {
            Scheme::F10 => self.step_f10(state, dt),
            Scheme::F01 => self.step_f01(state, dt),
            Scheme::EulerA => self.euler_a_step(state, dt),
            Scheme::EulerB => self.euler_b_step(state, dt),
        }
    }
}

/// Courant-limited time step `safety * h_min / c_max`, with `h_min` the
/// smallest inscribed diameter of the mesh.
pub fn stable_dt(mesh: &Mesh, model: &Material, safety: f64) -> Result<f64, StepError> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(StepError::InvalidProblem(format!(
            "safety fraction {safety} not in (0, 1]"
        )));
    }
    let linear = model.as_linear().ok_or(StepError::UnsupportedEstimate)?;
    Ok(safety * mesh.min_inscribed_diameter() / linear.max_wave_speed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{LinearThermoElastic, NonlinearThermoElastic, ThermalParameters};
    use crate::mesh::{generate_box_tet_mesh, generate_segment_mesh};
    use approx::assert_relative_eq;

    fn harmonic() -> LinearThermoElastic {
        LinearThermoElastic::uniaxial(
            20.0,
            ThermalParameters {
                specific_heat: 0.1,
                coupling: 0.1,
                conductivity: 0.1,
                density: 1.0,
                reference_temperature: 10.0,
                reference_entropy: 0.0,
            },
        )
        .unwrap()
    }

    fn beam_model() -> NonlinearThermoElastic {
        NonlinearThermoElastic::new(
            3,
            83.33,
            55.55,
            ThermalParameters {
                specific_heat: 5.0,
                coupling: 0.5,
                conductivity: 1.0,
                density: 1.5,
                reference_temperature: 10.0,
                reference_entropy: 10.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn stable_dt_examples() {
        let mesh = generate_segment_mesh(100.0, 10).unwrap();
        let model = Material::Linear(harmonic());
        let dt = stable_dt(&mesh, &model, 1.0).unwrap();
        assert!((dt - 2.1396).abs() < 1e-4);
        assert!((0.5 / dt - 0.2337).abs() < 1e-4);
        assert!(stable_dt(&mesh, &model, 0.0).is_err());
        assert!(stable_dt(&mesh, &model, 1.5).is_err());
        let nl = Material::Nonlinear(
            NonlinearThermoElastic::new(1, 1.0, 1.0, harmonic().thermal).unwrap(),
        );
        assert_eq!(
            stable_dt(&mesh, &nl, 0.5),
            Err(StepError::UnsupportedEstimate)
        );
    }

    fn translating_state(problem: &Problem<NonlinearThermoElastic>, v: Point) -> State {
        let n = problem.mesh().n_nodes();
        problem
            .initialize(
                problem.mesh().coords(),
                &vec![v; n],
                &vec![0.0; n],
                &vec![10.0; n],
            )
            .unwrap()
    }

    #[test]
    fn uniform_translation_is_exact_for_every_scheme() {
        let mesh = generate_box_tet_mesh([2.0, 1.0, 1.0], [2, 1, 1]).unwrap();
        let problem = Problem::new(mesh, beam_model(), BoundaryConditions::isolated()).unwrap();
        let v = Point::new(0.3, -0.2, 0.1);
        let s0 = translating_state(&problem, v);
        for scheme in [Scheme::F10, Scheme::F01, Scheme::EulerA, Scheme::EulerB] {
            let mut s = s0.clone();
            for _ in 0..4 {
                s = problem.step(scheme, &s, 0.1).unwrap();
            }
            assert_relative_eq!(s.time, 0.4, max_relative = 1e-14);
            for a in 0..s.n_nodes() {
                assert_relative_eq!(
                    s.motion[a],
                    problem.mesh().coords()[a] + 0.4 * v,
                    epsilon = 1e-12
                );
                assert_relative_eq!(s.thermal[a], 4.0, max_relative = 1e-12);
                assert_relative_eq!(s.momentum[a], s0.momentum[a], epsilon = 1e-10);
                assert_relative_eq!(
                    s.entropy_momentum[a],
                    s0.entropy_momentum[a],
                    max_relative = 1e-12
                );
                assert_relative_eq!(s.temperature[a], 10.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn initialization_round_trip() {
        let mesh = generate_segment_mesh(10.0, 5).unwrap();
        let problem = Problem::new(mesh, harmonic(), BoundaryConditions::isolated()).unwrap();
        let n = 6;
        let v: Vec<Point> = (0..n)
            .map(|a| Point::new(a as f64 * 0.1, 0.0, 0.0))
            .collect();
        let theta: Vec<f64> = (0..n).map(|a| 9.0 + a as f64).collect();
        let s = problem
            .initialize(problem.mesh().coords(), &v, &vec![0.0; n], &theta)
            .unwrap();
        for (back, orig) in s.velocities(problem.mass()).iter().zip(&v) {
            assert_relative_eq!(back, orig, epsilon = 1e-14);
        }
        let fresh = problem.euler_a_step(&s, 1e-300).unwrap();
        for (a, t) in theta.iter().enumerate() {
            assert_relative_eq!(fresh.temperature[a], *t, max_relative = 1e-12);
        }
    }

    #[test]
    fn labels_and_data_must_agree() {
        let mut mesh = generate_segment_mesh(1.0, 2).unwrap();
        mesh.label_facets(BoundaryLabels::MECH_DIRICHLET, |x| x.x == 0.0);
        assert!(matches!(
            Problem::new(mesh.clone(), harmonic(), BoundaryConditions::isolated()),
            Err(StepError::InvalidProblem(_))
        ));
        let bc = BoundaryConditions {
            motion: Some(Prescribed::new(
                |x: &Point, _| *x,
                |_: &Point, _| Point::zeros(),
            )),
            ..Default::default()
        };
        assert!(Problem::new(mesh, harmonic(), bc).is_ok());
    }

    #[test]
    fn failed_step_leaves_input_untouched() {
        let mesh = generate_segment_mesh(1.0, 2).unwrap();
        let model = NonlinearThermoElastic::new(1, 1.0, 1.0, harmonic().thermal).unwrap();
        let problem = Problem::new(mesh, model, BoundaryConditions::isolated()).unwrap();
        let n = 3;
        let v = vec![
            Point::new(-5.0, 0.0, 0.0),
            Point::zeros(),
            Point::new(5.0, 0.0, 0.0),
        ];
        let s = problem
            .initialize(problem.mesh().coords(), &v, &vec![0.0; n], &vec![10.0; n])
            .unwrap();
        let snapshot = s.clone();
        // Node 0 overtakes node 1 within one step.
        let mut v = v;
        v[0].x = 50.0;
        let s = problem
            .initialize(problem.mesh().coords(), &v, &vec![0.0; n], &vec![10.0; n])
            .unwrap();
        let before = s.clone();
        let err = problem.step_f10(&s, 0.1).unwrap_err();
        assert!(matches!(err, StepError::Assembly(_)));
        assert_eq!(s, before);
        assert!(problem.step_f10(&snapshot, 0.0).is_err());
    }

    #[test]
    fn dirichlet_release_after_window() {
        let mut mesh = generate_segment_mesh(4.0, 4).unwrap();
        mesh.label_facets(
            BoundaryLabels::MECH_DIRICHLET | BoundaryLabels::THERMAL_DIRICHLET,
            |x| x.x == 4.0,
        );
        let bc = BoundaryConditions {
            motion: Some(Prescribed::new(
                |x: &Point, t| x + Point::new(0.1 * t, 0.0, 0.0),
                |_: &Point, _| Point::new(0.1, 0.0, 0.0),
            )),
            thermal: Some(Prescribed::new(
                |_: &Point, t| 10.0 * t + t * t,
                |_: &Point, t| 10.0 + 2.0 * t,
            )),
            active_until: Some(0.5),
            ..Default::default()
        };
        let problem = Problem::new(mesh, harmonic(), bc).unwrap();
        let n = 5;
        let mut s = problem
            .initialize(
                problem.mesh().coords(),
                &vec![Point::zeros(); n],
                &vec![0.0; n],
                &vec![10.0; n],
            )
            .unwrap();
        assert_relative_eq!(s.momentum[4].x, 0.1 * problem.mass()[4]);
        for _ in 0..5 {
            s = problem.step_f10(&s, 0.1).unwrap();
        }
        assert_relative_eq!(s.motion[4].x, 4.05, max_relative = 1e-12);
        assert_relative_eq!(s.thermal[4], 5.25, max_relative = 1e-12);
        assert_relative_eq!(s.temperature[4], 11.0, max_relative = 1e-12);
        // Released: the temperature no longer follows the ramp and total
        // entropy is frozen.
        let next = problem.step_f10(&s, 0.1).unwrap();
        assert!((next.temperature[4] - 11.2).abs() > 1e-6);
        let after = problem.step_f10(&next, 0.1).unwrap();
        let total = |s: &State| s.entropy_momentum.iter().sum::<f64>();
        assert_relative_eq!(total(&after), total(&next), max_relative = 1e-13);
    }
}
