//! Conserved quantities, error norms and the analytic harmonic wave.

use thiserror::Error;

use crate::assembly::{all_kinematics, AssemblyError};
use crate::integrator::{Problem, State, StepError};
use crate::material::{LinearThermoElastic, MaterialError, ThermoElasticMaterial};
use crate::mesh::{Mesh, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("exact field has zero norm; relative error undefined")]
    UndefinedRelativeError,
}

/// Angular momentum, whose shape depends on the dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngularMomentum {
    /// Not defined in one dimension.
    Undefined,
    Scalar(f64),
    Vector(Point),
}

impl AngularMomentum {
    /// Components in `x, y, z` order; `None` where the quantity has none.
    pub fn components(&self) -> [Option<f64>; 3] {
        match *self {
            AngularMomentum::Undefined => [None; 3],
            AngularMomentum::Scalar(a) => [None, None, Some(a)],
            AngularMomentum::Vector(v) => [Some(v.x), Some(v.y), Some(v.z)],
        }
    }

    pub fn norm(&self) -> f64 {
        match *self {
            AngularMomentum::Undefined => 0.0,
            AngularMomentum::Scalar(a) => a.abs(),
            AngularMomentum::Vector(v) => v.norm(),
        }
    }
}

/// Relative L2 errors of displacement, thermal displacement, velocity and
/// temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldErrors {
    pub displacement: f64,
    pub thermal: f64,
    pub velocity: f64,
    pub temperature: f64,
}

impl FieldErrors {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.displacement,
            self.thermal,
            self.velocity,
            self.temperature,
        ]
    }
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub energy: f64,
    /// Linear momentum, zero beyond the mesh dimension.
    pub linear: Point,
    pub angular: AngularMomentum,
    pub entropy: f64,
    pub errors: Option<FieldErrors>,
}

/// Linear and angular momenta.
pub fn momenta(dim: usize, state: &State) -> (Point, AngularMomentum) {
    let linear: Point = state.momentum.iter().sum();
    let angular = match dim {
        1 => AngularMomentum::Undefined,
        2 => AngularMomentum::Scalar(
            state
                .motion
                .iter()
                .zip(&state.momentum)
                .map(|(x, p)| x.x * p.y - x.y * p.x)
                .sum(),
        ),
        _ => AngularMomentum::Vector(
            state
                .motion
                .iter()
                .zip(&state.momentum)
                .map(|(x, p)| x.cross(p))
                .sum(),
        ),
    };
    (linear, angular)
}

/// Total entropy, the sum of nodal thermal momenta.
pub fn total_entropy(state: &State) -> f64 {
    state.entropy_momentum.iter().sum()
}

/// Total energy: kinetic plus internal energy under the nodal rule, plus the
/// potential of active loads measured from the reference configuration.
pub fn total_energy<M: ThermoElasticMaterial>(
    problem: &Problem<M>,
    state: &State,
) -> Result<f64, DiagnosticsError> {
    let mesh = problem.mesh();
    let model = problem.model();
    let kinetic: f64 = state
        .momentum
        .iter()
        .zip(problem.mass())
        .map(|(p, m)| p.norm_squared() / (2.0 * m))
        .sum();

    let kin = all_kinematics(mesh, &state.motion, &state.thermal)?;
    let weights = &mesh.lumped_weights().per_element;
    let mut internal = 0.0;
    for (k, el) in kin.iter().enumerate() {
        for &a in mesh.element(k) {
            let theta = state.temperature[a];
            let element_err = |source| AssemblyError::Element { element: k, source };
            let eta = model.entropy(&el.deformation, theta).map_err(element_err)?;
            let free = model
                .free_energy(&el.deformation, &el.thermal_gradient, theta)
                .map_err(element_err)?;
            internal += weights[k] * (eta * theta + free);
        }
    }
    internal *= model.density();

    let bc = problem.boundary_conditions();
    let external = if bc.has_loads() && bc.active_at(state.time) {
        let forces = problem.external_force(state.time, state.time);
        let sources = problem.entropy_source(state.time, state.time);
        let coords = mesh.coords();
        -(0..mesh.n_nodes())
            .map(|a| forces[a].dot(&(state.motion[a] - coords[a])) + sources[a] * state.thermal[a])
            .sum::<f64>()
    } else {
        0.0
    };
    Ok(kinetic + internal + external)
}

/// Full diagnostics row; `errors` is attached as given.
pub fn record<M: ThermoElasticMaterial>(
    problem: &Problem<M>,
    state: &State,
    errors: Option<FieldErrors>,
) -> Result<DiagnosticsRecord, DiagnosticsError> {
    let (linear, angular) = momenta(problem.mesh().dim(), state);
    Ok(DiagnosticsRecord {
        time: state.time,
        energy: total_energy(problem, state)?,
        linear,
        angular,
        entropy: total_entropy(state),
        errors,
    })
}

/// Barycentric points and weights (fractions of the element volume) of the
/// Gauss–Legendre rule used for error norms.
fn quadrature(dim: usize) -> Vec<([f64; 4], f64)> {
    match dim {
        1 => {
            let s = 0.5 / 3f64.sqrt();
            vec![
                ([0.5 + s, 0.5 - s, 0.0, 0.0], 0.5),
                ([0.5 - s, 0.5 + s, 0.0, 0.0], 0.5),
            ]
        }
        2 => {
            let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
            vec![
                ([a, b, b, 0.0], 1.0 / 3.0),
                ([b, a, b, 0.0], 1.0 / 3.0),
                ([b, b, a, 0.0], 1.0 / 3.0),
            ]
        }
        _ => {
            let a = (5.0 + 3.0 * 5f64.sqrt()) / 20.0;
            let b = (5.0 - 5f64.sqrt()) / 20.0;
            vec![
                ([a, b, b, b], 0.25),
                ([b, a, b, b], 0.25),
                ([b, b, a, b], 0.25),
                ([b, b, b, a], 0.25),
            ]
        }
    }
}

/// Relative L2 error of a nodal P1 field against `exact`.
pub fn l2_error<F>(mesh: &Mesh, values: &[Point], exact: F) -> Result<f64, DiagnosticsError>
where
    F: Fn(&Point) -> Point,
{
    crate::assembly::check_len("field", mesh.n_nodes(), values.len())?;
    let coords = mesh.coords();
    let rule = quadrature(mesh.dim());
    let (mut diff, mut norm) = (0.0, 0.0);
    for (k, nodes) in mesh.elements().enumerate() {
        let volume = mesh
            .element_geometry(k)
            .map_err(AssemblyError::from)?
            .volume;
        for (bary, w) in &rule {
            let mut x = Point::zeros();
            let mut z = Point::zeros();
            for (i, &a) in nodes.iter().enumerate() {
                x += bary[i] * coords[a];
                z += bary[i] * values[a];
            }
            let target = exact(&x);
            diff += w * volume * (z - target).norm_squared();
            norm += w * volume * target.norm_squared();
        }
    }
    if norm == 0.0 {
        return Err(DiagnosticsError::UndefinedRelativeError);
    }
    Ok((diff / norm).sqrt())
}

/// Scalar version of [`l2_error`].
pub fn l2_error_scalar<F>(mesh: &Mesh, values: &[f64], exact: F) -> Result<f64, DiagnosticsError>
where
    F: Fn(&Point) -> f64,
{
    let lifted: Vec<Point> = values.iter().map(|&v| Point::new(v, 0.0, 0.0)).collect();
    l2_error(mesh, &lifted, |x| Point::new(exact(x), 0.0, 0.0))
}

/// Travelling thermo-elastic wave along `x` on the fast branch:
/// `u = A cos(Kx + wt)`, `Phi = B cos(Kx + wt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicReference {
    pub omega: f64,
    pub wavenumber: f64,
    pub motion_amplitude: f64,
    pub thermal_amplitude: f64,
    mechanical_speed_sq: f64,
    thermal_speed_sq: f64,
    coupling: f64,
    heat_coupling: f64,
}

impl HarmonicReference {
    /// Wave with angular frequency `omega`.
    pub fn from_omega(
        model: &LinearThermoElastic,
        omega: f64,
        amplitude: f64,
    ) -> Result<Self, MaterialError> {
        let speed = model.max_wave_speed();
        Self::build(model, omega, omega / speed, amplitude)
    }

    /// Wave with wavenumber `wavenumber`.
    pub fn from_wavenumber(
        model: &LinearThermoElastic,
        wavenumber: f64,
        amplitude: f64,
    ) -> Result<Self, MaterialError> {
        let speed = model.max_wave_speed();
        Self::build(model, wavenumber * speed, wavenumber, amplitude)
    }

    fn build(
        model: &LinearThermoElastic,
        omega: f64,
        wavenumber: f64,
        amplitude: f64,
    ) -> Result<Self, MaterialError> {
        let ratio = model.amplitude_ratio(omega / wavenumber)?;
        let t = &model.thermal;
        let (mech, thermal) = model.uncoupled_speeds();
        Ok(Self {
            omega,
            wavenumber,
            motion_amplitude: amplitude,
            thermal_amplitude: amplitude * ratio,
            mechanical_speed_sq: mech * mech,
            thermal_speed_sq: thermal * thermal,
            coupling: t.coupling,
            heat_coupling: t.coupling * t.reference_temperature / t.specific_heat,
        })
    }

    fn phase(&self, x: f64, t: f64) -> f64 {
        self.wavenumber * x + self.omega * t
    }

    pub fn displacement(&self, x: f64, t: f64) -> f64 {
        self.motion_amplitude * self.phase(x, t).cos()
    }

    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        -self.omega * self.motion_amplitude * self.phase(x, t).sin()
    }

    pub fn thermal(&self, x: f64, t: f64) -> f64 {
        self.thermal_amplitude * self.phase(x, t).cos()
    }

    /// Temperature, the time derivative of the thermal displacement.
    pub fn temperature(&self, x: f64, t: f64) -> f64 {
        -self.omega * self.thermal_amplitude * self.phase(x, t).sin()
    }

    /// Residual of the quartic dispersion relation
    /// `(w^2 - a K^2)(w^2 - b K^2) - g w^2 K^2 = 0`, relative to `w^4`.
    pub fn dispersion_residual(&self) -> f64 {
        let w2 = self.omega * self.omega;
        let k2 = self.wavenumber * self.wavenumber;
        let value = (w2 - self.mechanical_speed_sq * k2) * (w2 - self.thermal_speed_sq * k2)
            - self.coupling * self.heat_coupling * w2 * k2;
        value / (w2 * w2)
    }

    /// Squared speeds and couplings of the governing system
    /// `u_tt = a u_xx - g Phi_tx`, `Phi_tt = b Phi_xx - h u_tx`.
    pub fn system_coefficients(&self) -> [f64; 4] {
        [
            self.mechanical_speed_sq,
            self.coupling,
            self.thermal_speed_sq,
            self.heat_coupling,
        ]
    }

    /// Relative L2 errors of a one-dimensional state.
    pub fn errors<M: ThermoElasticMaterial>(
        &self,
        problem: &Problem<M>,
        state: &State,
    ) -> Result<FieldErrors, DiagnosticsError> {
        let mesh = problem.mesh();
        let t = state.time;
        let displacement: Vec<f64> = state
            .motion
            .iter()
            .zip(mesh.coords())
            .map(|(x, r)| x.x - r.x)
            .collect();
        let velocity: Vec<f64> = state
            .velocities(problem.mass())
            .iter()
            .map(|v| v.x)
            .collect();
        Ok(FieldErrors {
            displacement: l2_error_scalar(mesh, &displacement, |x| self.displacement(x.x, t))?,
            thermal: l2_error_scalar(mesh, &state.thermal, |x| self.thermal(x.x, t))?,
            velocity: l2_error_scalar(mesh, &velocity, |x| self.velocity(x.x, t))?,
            temperature: l2_error_scalar(mesh, &state.temperature, |x| self.temperature(x.x, t))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::BoundaryConditions;
    use crate::material::{NonlinearThermoElastic, ThermalParameters};
    use crate::mesh::{generate_box_tet_mesh, generate_rectangle_tri_mesh, generate_segment_mesh};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn params(eta0: f64) -> ThermalParameters {
        ThermalParameters {
            specific_heat: 0.1,
            coupling: 0.1,
            conductivity: 0.1,
            density: 1.0,
            reference_temperature: 10.0,
            reference_entropy: eta0,
        }
    }

    fn bar(eta0: f64) -> LinearThermoElastic {
        LinearThermoElastic::uniaxial(20.0, params(eta0)).unwrap()
    }

    fn at_rest<M: ThermoElasticMaterial>(problem: &Problem<M>, v: Point) -> State {
        let n = problem.mesh().n_nodes();
        let theta = problem.model().reference_temperature();
        problem
            .initialize(
                problem.mesh().coords(),
                &vec![v; n],
                &vec![0.0; n],
                &vec![theta; n],
            )
            .unwrap()
    }

    #[test]
    fn reference_energy_and_entropy() {
        let problem = Problem::new(
            generate_segment_mesh(5.0, 5).unwrap(),
            bar(0.7),
            BoundaryConditions::isolated(),
        )
        .unwrap();
        let s = at_rest(&problem, Point::zeros());
        assert_relative_eq!(
            total_energy(&problem, &s).unwrap(),
            0.7 * 10.0 * 5.0,
            max_relative = 1e-13
        );
        assert_relative_eq!(total_entropy(&s), 0.7 * 5.0, max_relative = 1e-13);
        let moving = at_rest(&problem, Point::new(2.0, 0.0, 0.0));
        assert_relative_eq!(
            total_energy(&problem, &moving).unwrap(),
            35.0 + 0.5 * 4.0 * 5.0,
            max_relative = 1e-13
        );
    }

    #[test]
    fn energy_momentum_derivative_is_velocity() {
        let mesh = generate_box_tet_mesh([1.0, 1.0, 1.0], [1, 1, 1]).unwrap();
        let model = NonlinearThermoElastic::new(3, 2.0, 1.0, params(1.0)).unwrap();
        let problem = Problem::new(mesh, model, BoundaryConditions::isolated()).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        let n = problem.mesh().n_nodes();
        let v: Vec<Point> = (0..n)
            .map(|_| {
                Point::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let s = problem
            .initialize(problem.mesh().coords(), &v, &vec![0.0; n], &vec![10.0; n])
            .unwrap();
        let d = 1e-6;
        for a in 0..n {
            for i in 0..3 {
                let (mut plus, mut minus) = (s.clone(), s.clone());
                plus.momentum[a][i] += d;
                minus.momentum[a][i] -= d;
                let fd = (total_energy(&problem, &plus).unwrap()
                    - total_energy(&problem, &minus).unwrap())
                    / (2.0 * d);
                assert!((fd - v[a][i]).abs() < 1e-8 * v[a][i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn momenta_examples() {
        let state = State {
            time: 0.0,
            motion: vec![Point::x(), Point::new(0.0, 2.0, 0.0)],
            thermal: vec![0.0; 2],
            momentum: vec![Point::y(), Point::zeros()],
            entropy_momentum: vec![1.0, 2.5],
            temperature: vec![1.0; 2],
        };
        let (l, a) = momenta(3, &state);
        assert_eq!(l, Point::y());
        assert_eq!(a, AngularMomentum::Vector(Point::z()));
        assert_eq!(momenta(2, &state).1, AngularMomentum::Scalar(1.0));
        assert_eq!(momenta(1, &state).1, AngularMomentum::Undefined);
        assert_eq!(total_entropy(&state), 3.5);

        let shift = Point::new(0.1, -0.3, 0.2);
        let mut shifted = state.clone();
        shifted.momentum.iter_mut().for_each(|p| *p += shift);
        let (l2, a2) = momenta(3, &shifted);
        assert_relative_eq!(l2, l + 2.0 * shift);
        let sum_x: Point = state.motion.iter().sum();
        let AngularMomentum::Vector(a2) = a2 else {
            unreachable!()
        };
        assert_relative_eq!(a2, Point::z() + sum_x.cross(&shift), epsilon = 1e-15);
    }

    #[test]
    fn l2_error_oracles() {
        let mesh = generate_segment_mesh(1.0, 4).unwrap();
        let exact = |x: &Point| 1.0 + x.x;
        let nodal: Vec<f64> = mesh.coords().iter().map(exact).collect();
        assert!(l2_error_scalar(&mesh, &nodal, exact).unwrap() < 1e-15);
        // |1 + x| has squared norm 7/3 on the unit interval.
        let shifted: Vec<f64> = nodal.iter().map(|v| v + 0.2).collect();
        let e = l2_error_scalar(&mesh, &shifted, exact).unwrap();
        assert_relative_eq!(e, 0.2 / (7.0f64 / 3.0).sqrt(), max_relative = 1e-13);
        let scaled: Vec<f64> = shifted.iter().map(|v| 3.0 * v).collect();
        let e3 = l2_error_scalar(&mesh, &scaled, |x| 3.0 * exact(x)).unwrap();
        assert_relative_eq!(e, e3, max_relative = 1e-13);
        assert_eq!(
            l2_error_scalar(&mesh, &nodal, |_| 0.0),
            Err(DiagnosticsError::UndefinedRelativeError)
        );
    }

    #[test]
    fn quadrature_integrates_quadratics() {
        let tri = generate_rectangle_tri_mesh([1.0, 1.0], [2, 2]).unwrap();
        let tet = generate_box_tet_mesh([1.0, 1.0, 1.0], [2, 2, 2]).unwrap();
        for mesh in [&tri, &tet] {
            let zeros = vec![0.0; mesh.n_nodes()];
            // error of zero against x is ||x|| / ||x|| = 1; against x y the
            // integral is exact for the squared norm only up to degree 2, so
            // compare the ratio of x and 2x instead.
            let r = l2_error_scalar(mesh, &zeros, |x| x.x).unwrap();
            assert_relative_eq!(r, 1.0, max_relative = 1e-14);
            let nodal: Vec<f64> = mesh.coords().iter().map(|x| x.x).collect();
            let e = l2_error_scalar(mesh, &nodal, |x| x.x + 1.0).unwrap();
            // ||1|| / ||x + 1|| = 1 / sqrt(7/3)
            assert_relative_eq!(e, (3.0f64 / 7.0).sqrt(), max_relative = 1e-13);
        }
    }

    #[test]
    fn harmonic_constants() {
        let r = HarmonicReference::from_omega(&bar(0.0), 4.0, 1.0).unwrap();
        assert!((r.wavenumber - 0.855837).abs() < 1e-6);
        assert!((r.thermal_amplitude + 3.94603).abs() < 1e-5);
        assert!(r.dispersion_residual().abs() < 1e-12);
        let mut p = params(0.0);
        p.coupling = 0.0;
        let decoupled = LinearThermoElastic::uniaxial(20.0, p).unwrap();
        assert_eq!(
            HarmonicReference::from_omega(&decoupled, 4.0, 1.0),
            Err(MaterialError::UndefinedCoupling)
        );
    }

    #[test]
    fn harmonic_solves_governing_system() {
        let r = HarmonicReference::from_omega(&bar(0.0), 4.0, 1.0).unwrap();
        let [a, g, b, h] = r.system_coefficients();
        let mut rng = StdRng::seed_from_u64(11);
        let d = 1e-3;
        for _ in 0..20 {
            let x = rng.gen_range(0.0..100.0);
            let t = rng.gen_range(0.0..5.0);
            let second = |f: &dyn Fn(f64, f64) -> f64, dx: f64, dt: f64| {
                (f(x + dx, t + dt) - 2.0 * f(x, t) + f(x - dx, t - dt)) / (d * d)
            };
            let u = |x: f64, t: f64| r.displacement(x, t);
            let phi = |x: f64, t: f64| r.thermal(x, t);
            let mixed = |f: &dyn Fn(f64, f64) -> f64| {
                (f(x + d, t + d) - f(x + d, t - d) - f(x - d, t + d) + f(x - d, t - d))
                    / (4.0 * d * d)
            };
            let res_u = second(&u, 0.0, d) - a * second(&u, d, 0.0) + g * mixed(&phi);
            let res_phi = second(&phi, 0.0, d) - b * second(&phi, d, 0.0) + h * mixed(&u);
            let scale = r.omega * r.omega * r.thermal_amplitude.abs();
            assert!(res_u.abs() < 1e-5 * scale, "{res_u}");
            assert!(res_phi.abs() < 1e-5 * scale, "{res_phi}");
            let vel = (u(x, t + d) - u(x, t - d)) / (2.0 * d);
            assert!((vel - r.velocity(x, t)).abs() < 1e-4);
            let temp = (phi(x, t + d) - phi(x, t - d)) / (2.0 * d);
            assert!((temp - r.temperature(x, t)).abs() < 1e-4);
        }
    }
}
