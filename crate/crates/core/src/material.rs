//! Constitutive models for thermo-elastic solids without energy dissipation.
//!
//! A model is fully described by its Helmholtz free energy per unit mass
//! `A(F, beta, theta)`, where `F` is the deformation gradient, `beta` the
//! gradient of the thermal displacement and `theta` the temperature. Stress,
//! entropy and entropy flux derive from it:
//!
//! ```text
//! P = rho0 dA/dF,   eta = -dA/dtheta,   h = -rho0 dA/dbeta
//! ```
//!
//! Every model here satisfies `d2A/dbeta dtheta = 0`, so the entropy does not
//! depend on `beta` and the entropy flux does not depend on `theta`. Both
//! properties are what make the nodal integrator explicit.
//!
//! Tensors are `Matrix3` with the block beyond the model dimension ignored on
//! input and zero on output. Callers pad deformation gradients with the
//! identity there, which keeps `det F` unchanged.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Tensor = Matrix3<f64>;
pub type Vector = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("inverted deformation: det F = {det:e}")]
    InvertedElement { det: f64 },
    #[error("temperature {0} is not admissible (must be positive)")]
    InvalidTemperature(f64),
    #[error("entropy inverts to temperature {0}, outside the admissible range")]
    OutOfRangeTemperature(f64),
    #[error(
        "temperature solve did not converge after {iterations} iterations (residual {residual:e})"
    )]
    SolverFailure { iterations: usize, residual: f64 },
    #[error("thermo-mechanical coupling is zero; amplitude ratio undefined")]
    UndefinedCoupling,
    #[error("invalid material parameter: {0}")]
    InvalidParameter(String),
}

/// Constitutive contract shared by all thermo-elastic models.
pub trait ThermoElasticMaterial: Send + Sync {
    fn dim(&self) -> usize;
    /// Reference mass density.
    fn density(&self) -> f64;
    fn reference_temperature(&self) -> f64;
    fn reference_entropy(&self) -> f64;

    /// Helmholtz free energy per unit mass.
    fn free_energy(&self, f: &Tensor, beta: &Vector, theta: f64) -> Result<f64, MaterialError>;

    /// First Piola–Kirchhoff stress.
    fn stress(&self, f: &Tensor, beta: &Vector, theta: f64) -> Result<Tensor, MaterialError>;

    /// Entropy per unit mass.
    fn entropy(&self, f: &Tensor, theta: f64) -> Result<f64, MaterialError>;

    /// `d eta / d theta = -d2A/dtheta2`, strictly positive.
    fn entropy_slope(&self, f: &Tensor, theta: f64) -> Result<f64, MaterialError>;

    /// Entropy flux per unit reference area.
    fn entropy_flux(&self, beta: &Vector) -> Vector;

    /// Inverse of [`entropy`](Self::entropy) at fixed `F`.
    fn temperature_from_entropy(&self, f: &Tensor, eta: f64) -> Result<f64, MaterialError> {
        self.invert_mean_entropy(&[(1.0, *f)], eta)
    }

    /// Finds the temperature at which the weighted mean of `eta(F_i, theta)`
    /// equals `target`. Weights must be positive.
    ///
    /// The default is a safeguarded Newton iteration; shipped models
    /// override it with a closed form.
    fn invert_mean_entropy(
        &self,
        samples: &[(f64, Tensor)],
        target: f64,
    ) -> Result<f64, MaterialError> {
        newton_mean_entropy(self, samples, target)
    }

    /// Internal energy per unit mass, `U = eta * theta_hat + A(theta_hat)`.
    fn internal_energy(&self, f: &Tensor, beta: &Vector, eta: f64) -> Result<f64, MaterialError> {
        let theta = self.temperature_from_entropy(f, eta)?;
        Ok(eta * theta + self.free_energy(f, beta, theta)?)
    }
}

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

fn weighted_entropy<M: ThermoElasticMaterial + ?Sized>(
    model: &M,
    samples: &[(f64, Tensor)],
    theta: f64,
) -> Result<(f64, f64), MaterialError> {
    let total: f64 = samples.iter().map(|(w, _)| w).sum();
    let mut value = 0.0;
    let mut slope = 0.0;
    for (w, f) in samples {
        value += w * model.entropy(f, theta)?;
        slope += w * model.entropy_slope(f, theta)?;
    }
    Ok((value / total, slope / total))
}

/// Newton iteration with a bisection safeguard on a bracket in (0, inf).
pub fn newton_mean_entropy<M: ThermoElasticMaterial + ?Sized>(
    model: &M,
    samples: &[(f64, Tensor)],
    target: f64,
) -> Result<f64, MaterialError> {
    if samples.is_empty() {
        return Err(MaterialError::InvalidParameter("no entropy samples".into()));
    }
    let residual = |theta: f64| -> Result<(f64, f64), MaterialError> {
        let (eta, slope) = weighted_entropy(model, samples, theta)?;
        Ok((eta - target, slope))
    };
    let scale = target.abs().max(model.reference_entropy().abs()).max(1.0);

    // Entropy is increasing in theta: grow a bracket around the reference.
    let theta_ref = model.reference_temperature();
    let (mut lo, mut hi) = (theta_ref, theta_ref);
    let (mut r_lo, _) = residual(lo)?;
    let mut r_hi = r_lo;
    let mut expansions = 0;
    while r_lo > 0.0 {
        hi = lo;
        r_hi = r_lo;
        lo *= 0.5;
        r_lo = residual(lo)?.0;
        expansions += 1;
        if expansions > 1100 {
            return Err(MaterialError::OutOfRangeTemperature(lo));
        }
    }
    while r_hi < 0.0 {
        lo = hi;
        r_lo = r_hi;
        hi *= 2.0;
        r_hi = residual(hi)?.0;
        expansions += 1;
        if expansions > 1100 || !hi.is_finite() {
            return Err(MaterialError::OutOfRangeTemperature(hi));
        }
    }
    if r_lo == 0.0 {
        return Ok(lo);
    }
    if r_hi == 0.0 {
        return Ok(hi);
    }

    let mut theta = 0.5 * (lo + hi);
    let mut last = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let (r, slope) = residual(theta)?;
        last = r;
        if r.abs() <= NEWTON_TOL * scale {
            return Ok(theta);
        }
        if r < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let newton = theta - r / slope;
        theta = if newton > lo && newton < hi && slope > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= f64::EPSILON * hi {
            return Ok(theta);
        }
    }
    Err(MaterialError::SolverFailure {
        iterations: NEWTON_MAX_ITER,
        residual: last,
    })
}

/// Zeroes rows and columns at or beyond `dim`.
fn restrict(dim: usize, mut m: Tensor) -> Tensor {
    for i in 0..3 {
        for j in 0..3 {
            if i >= dim || j >= dim {
                m[(i, j)] = 0.0;
            }
        }
    }
    m
}

fn identity(dim: usize) -> Tensor {
    restrict(dim, Tensor::identity())
}

fn frobenius_sq(dim: usize, m: &Tensor) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s
}

fn check_dim(dim: usize) -> Result<(), MaterialError> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(MaterialError::InvalidParameter(format!(
            "dimension {dim} not in 1..=3"
        )))
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), MaterialError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(MaterialError::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn check_finite(name: &str, v: f64) -> Result<(), MaterialError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(MaterialError::InvalidParameter(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

/// Thermal parameters shared by both shipped models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParameters {
    /// Specific heat `c`.
    pub specific_heat: f64,
    /// Thermo-mechanical coupling `gamma`.
    pub coupling: f64,
    /// Non-classical conductivity `kappa`.
    pub conductivity: f64,
    pub density: f64,
    pub reference_temperature: f64,
    pub reference_entropy: f64,
}

impl ThermalParameters {
    fn validate(&self) -> Result<(), MaterialError> {
        check_positive("specific heat", self.specific_heat)?;
        check_positive("density", self.density)?;
        check_positive("reference temperature", self.reference_temperature)?;
        check_finite("coupling", self.coupling)?;
        check_finite("reference entropy", self.reference_entropy)?;
        if !(self.conductivity >= 0.0) || !self.conductivity.is_finite() {
            return Err(MaterialError::InvalidParameter(format!(
                "conductivity must be non-negative, got {}",
                self.conductivity
            )));
        }
        Ok(())
    }
}

/// Small-strain elastic moduli.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearStiffness {
    /// Scalar effective stiffness of a one-dimensional bar.
    Uniaxial { stiffness: f64 },
    /// Isotropic Lamé pair; plane strain in two dimensions.
    Isotropic { lambda: f64, mu: f64 },
}

/// Free energy quadratic in the small strain, the temperature change and
/// the thermal strain.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearThermoElastic {
    dim: usize,
    pub stiffness: LinearStiffness,
    pub thermal: ThermalParameters,
    /// Accept non-positive temperatures from the entropy inversion. The
    /// model is affine in `theta`, so this is meaningful for perturbation
    /// studies where only temperature differences matter.
    pub allow_nonpositive_temperature: bool,
}

impl LinearThermoElastic {
    /// One-dimensional bar with effective stiffness `stiffness`.
    pub fn uniaxial(stiffness: f64, thermal: ThermalParameters) -> Result<Self, MaterialError> {
        check_positive("stiffness", stiffness)?;
        thermal.validate()?;
        Ok(Self {
            dim: 1,
            stiffness: LinearStiffness::Uniaxial { stiffness },
            thermal,
            allow_nonpositive_temperature: false,
        })
    }

    /// Isotropic solid in two (plane strain) or three dimensions.
    pub fn isotropic(
        dim: usize,
        lambda: f64,
        mu: f64,
        thermal: ThermalParameters,
    ) -> Result<Self, MaterialError> {
        check_dim(dim)?;
        if dim == 1 {
            return Self::uniaxial(lambda + 2.0 * mu, thermal);
        }
        check_positive("mu", mu)?;
        check_finite("lambda", lambda)?;
        if !(lambda + 2.0 * mu / dim as f64 > 0.0) {
            return Err(MaterialError::InvalidParameter(
                "bulk modulus must be positive".into(),
            ));
        }
        thermal.validate()?;
        Ok(Self {
            dim,
            stiffness: LinearStiffness::Isotropic { lambda, mu },
            thermal,
            allow_nonpositive_temperature: false,
        })
    }

    pub fn with_nonpositive_temperatures(mut self, allow: bool) -> Self {
        self.allow_nonpositive_temperature = allow;
        self
    }

    /// Modulus governing longitudinal waves: `E` in 1D, `lambda + 2 mu`
    /// otherwise.
    pub fn effective_stiffness(&self) -> f64 {
        match self.stiffness {
            LinearStiffness::Uniaxial { stiffness } => stiffness,
            LinearStiffness::Isotropic { lambda, mu } => lambda + 2.0 * mu,
        }
    }

    /// Small strain `e = (F + F^T)/2 - I`.
    pub fn small_strain(&self, f: &Tensor) -> Tensor {
        restrict(self.dim, 0.5 * (f + f.transpose()) - Tensor::identity())
    }

    /// `C : e`.
    fn elastic_stress(&self, e: &Tensor) -> Tensor {
        match self.stiffness {
            LinearStiffness::Uniaxial { stiffness } => stiffness * e,
            LinearStiffness::Isotropic { lambda, mu } => {
                lambda * e.trace() * identity(self.dim) + 2.0 * mu * e
            }
        }
    }

    fn check_temperature(&self, theta: f64) -> Result<f64, MaterialError> {
        if !theta.is_finite() || (!self.allow_nonpositive_temperature && theta <= 0.0) {
            Err(MaterialError::OutOfRangeTemperature(theta))
        } else {
            Ok(theta)
        }
    }

    /// Sound speed squared of the plain mechanical wave.
    fn mechanical_speed_sq(&self) -> f64 {
        self.effective_stiffness() / self.thermal.density
    }

    fn thermal_speed_sq(&self) -> f64 {
        let t = &self.thermal;
        t.conductivity * t.reference_temperature / (t.specific_heat * t.density)
    }

    /// Squared phase speeds `(omega/K)^2` of the two coupled branches,
    /// fast branch first.
    pub fn phase_speeds_sq(&self) -> (f64, f64) {
        let ThermalParameters {
            specific_heat: c,
            coupling: gamma,
            conductivity: kappa,
            density: rho0,
            reference_temperature: theta0,
            ..
        } = self.thermal;
        let e = self.effective_stiffness();
        let g2 = gamma * gamma;
        let sum = theta0 * (rho0 * g2 + kappa) + c * e;
        let disc = rho0 * rho0 * theta0 * theta0 * g2 * g2
            + 2.0 * rho0 * theta0 * g2 * (c * e + kappa * theta0)
            + (c * e - kappa * theta0).powi(2);
        let root = disc.max(0.0).sqrt();
        let denom = 2.0 * c * rho0;
        ((sum + root) / denom, ((sum - root) / denom).max(0.0))
    }

    /// The four roots `[w++, w+-, w-+, w--]` of the harmonic dispersion
    /// relation for wavenumber `k`. The first sign is the outer one.
    pub fn dispersion_omega(&self, k: f64) -> [f64; 4] {
        let (fast, slow) = self.phase_speeds_sq();
        let (fast, slow) = (fast.sqrt(), slow.sqrt());
        [k * fast, k * slow, -k * fast, -k * slow]
    }

    /// Largest characteristic speed; independent of the wavenumber.
    pub fn max_wave_speed(&self) -> f64 {
        self.phase_speeds_sq().0.sqrt()
    }

    /// Thermal to mechanical amplitude ratio of a harmonic wave travelling at
    /// `phase_speed`.
    pub fn amplitude_ratio(&self, phase_speed: f64) -> Result<f64, MaterialError> {
        let gamma = self.thermal.coupling;
        if gamma == 0.0 {
            return Err(MaterialError::UndefinedCoupling);
        }
        if phase_speed == 0.0 || !phase_speed.is_finite() {
            return Err(MaterialError::InvalidParameter(format!(
                "phase speed must be non-zero, got {phase_speed}"
            )));
        }
        Ok((self.mechanical_speed_sq() - phase_speed * phase_speed) / (gamma * phase_speed))
    }

    /// Speeds of the uncoupled mechanical and thermal waves.
    pub fn uncoupled_speeds(&self) -> (f64, f64) {
        (
            self.mechanical_speed_sq().sqrt(),
            self.thermal_speed_sq().sqrt(),
        )
    }
}

impl ThermoElasticMaterial for LinearThermoElastic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn density(&self) -> f64 {
        self.thermal.density
    }

    fn reference_temperature(&self) -> f64 {
        self.thermal.reference_temperature
    }

    fn reference_entropy(&self) -> f64 {
        self.thermal.reference_entropy
    }

    fn free_energy(&self, f: &Tensor, beta: &Vector, theta: f64) -> Result<f64, MaterialError> {
        let t = &self.thermal;
        let e = self.small_strain(f);
        let dtheta = theta - t.reference_temperature;
        let beta_sq = beta.rows(0, self.dim).norm_squared();
        Ok(e.dot(&self.elastic_stress(&e)) / (2.0 * t.density)
            - t.specific_heat / (2.0 * t.reference_temperature) * dtheta * dtheta
            - t.coupling * dtheta * e.trace()
            - dtheta * t.reference_entropy
            + t.conductivity / (2.0 * t.density) * beta_sq)
    }

    fn stress(&self, f: &Tensor, _beta: &Vector, theta: f64) -> Result<Tensor, MaterialError> {
        let t = &self.thermal;
        let e = self.small_strain(f);
        Ok(self.elastic_stress(&e)
            - t.density * t.coupling * (theta - t.reference_temperature) * identity(self.dim))
    }

    fn entropy(&self, f: &Tensor, theta: f64) -> Result<f64, MaterialError> {
        let t = &self.thermal;
        let e = self.small_strain(f);
        Ok(
            t.specific_heat / t.reference_temperature * (theta - t.reference_temperature)
                + t.coupling * e.trace()
                + t.reference_entropy,
        )
    }

    fn entropy_slope(&self, _f: &Tensor, _theta: f64) -> Result<f64, MaterialError> {
        Ok(self.thermal.specific_heat / self.thermal.reference_temperature)
    }

    fn entropy_flux(&self, beta: &Vector) -> Vector {
        let mut h = -self.thermal.conductivity * beta;
        h.iter_mut().skip(self.dim).for_each(|c| *c = 0.0);
        h
    }

    fn invert_mean_entropy(
        &self,
        samples: &[(f64, Tensor)],
        target: f64,
    ) -> Result<f64, MaterialError> {
        let t = &self.thermal;
        let total: f64 = samples.iter().map(|(w, _)| w).sum();
        let mean_trace: f64 = samples
            .iter()
            .map(|(w, f)| w * self.small_strain(f).trace())
            .sum::<f64>()
            / total;
        let theta = t.reference_temperature
            * (1.0 + (target - t.reference_entropy - t.coupling * mean_trace) / t.specific_heat);
        self.check_temperature(theta)
    }
}

/// Large-deformation model with a compressible neo-Hookean elastic part.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearThermoElastic {
    dim: usize,
    pub mu: f64,
    pub lambda: f64,
    pub thermal: ThermalParameters,
}

impl NonlinearThermoElastic {
    pub fn new(
        dim: usize,
        mu: f64,
        lambda: f64,
        thermal: ThermalParameters,
    ) -> Result<Self, MaterialError> {
        check_dim(dim)?;
        check_positive("mu", mu)?;
        check_finite("lambda", lambda)?;
        thermal.validate()?;
        Ok(Self {
            dim,
            mu,
            lambda,
            thermal,
        })
    }

    fn log_det(&self, f: &Tensor) -> Result<f64, MaterialError> {
        // The identity padding leaves the determinant of the active block.
        let det = f.determinant();
        if !(det > 0.0) {
            return Err(MaterialError::InvertedElement { det });
        }
        Ok(det.ln())
    }

    fn check_theta(theta: f64) -> Result<(), MaterialError> {
        if theta > 0.0 && theta.is_finite() {
            Ok(())
        } else {
            Err(MaterialError::InvalidTemperature(theta))
        }
    }
}

impl ThermoElasticMaterial for NonlinearThermoElastic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn density(&self) -> f64 {
        self.thermal.density
    }

    fn reference_temperature(&self) -> f64 {
        self.thermal.reference_temperature
    }

    fn reference_entropy(&self) -> f64 {
        self.thermal.reference_entropy
    }

    fn free_energy(&self, f: &Tensor, beta: &Vector, theta: f64) -> Result<f64, MaterialError> {
        let t = &self.thermal;
        let ln_j = self.log_det(f)?;
        Self::check_theta(theta)?;
        let theta0 = t.reference_temperature;
        let rho0 = t.density;
        Ok(self.mu / (2.0 * rho0) * frobenius_sq(self.dim, f)
            + self.lambda / (2.0 * rho0) * ln_j * ln_j
            - self.mu / rho0 * ln_j
            - t.coupling * (theta - theta0) * ln_j
            + t.specific_heat * (theta - theta0 - theta * (theta / theta0).ln())
            - (theta - theta0) * t.reference_entropy
            + t.conductivity / (2.0 * rho0) * beta.rows(0, self.dim).norm_squared())
    }

    fn stress(&self, f: &Tensor, _beta: &Vector, theta: f64) -> Result<Tensor, MaterialError> {
        let t = &self.thermal;
        let ln_j = self.log_det(f)?;
        Self::check_theta(theta)?;
        let f_inv_t = f
            .try_inverse()
            .ok_or(MaterialError::InvertedElement {
                det: f.determinant(),
            })?
            .transpose();
        let scalar = self.lambda * ln_j
            - self.mu
            - t.density * t.coupling * (theta - t.reference_temperature);
        Ok(restrict(self.dim, self.mu * f + scalar * f_inv_t))
    }

    fn entropy(&self, f: &Tensor, theta: f64) -> Result<f64, MaterialError> {
        let t = &self.thermal;
        let ln_j = self.log_det(f)?;
        Self::check_theta(theta)?;
        Ok(t.specific_heat * (theta / t.reference_temperature).ln()
            + t.coupling * ln_j
            + t.reference_entropy)
    }

    fn entropy_slope(&self, _f: &Tensor, theta: f64) -> Result<f64, MaterialError> {
        Self::check_theta(theta)?;
        Ok(self.thermal.specific_heat / theta)
    }

    fn entropy_flux(&self, beta: &Vector) -> Vector {
        let mut h = -self.thermal.conductivity * beta;
        h.iter_mut().skip(self.dim).for_each(|c| *c = 0.0);
        h
    }

    fn invert_mean_entropy(
        &self,
        samples: &[(f64, Tensor)],
        target: f64,
    ) -> Result<f64, MaterialError> {
        let t = &self.thermal;
        let total: f64 = samples.iter().map(|(w, _)| w).sum();
        let mut mean_ln_j = 0.0;
        for (w, f) in samples {
            mean_ln_j += w * self.log_det(f)?;
        }
        mean_ln_j /= total;
        let theta = t.reference_temperature
            * ((target - t.reference_entropy - t.coupling * mean_ln_j) / t.specific_heat).exp();
        if theta > 0.0 && theta.is_finite() {
            Ok(theta)
        } else {
            Err(MaterialError::OutOfRangeTemperature(theta))
        }
    }
}

/// Either shipped model, for configuration-driven code paths.
#[derive(Debug, Clone, PartialEq)]
pub enum Material {
    Linear(LinearThermoElastic),
    Nonlinear(NonlinearThermoElastic),
}

impl Material {
    pub fn as_linear(&self) -> Option<&LinearThermoElastic> {
        match self {
            Material::Linear(m) => Some(m),
            Material::Nonlinear(_) => None,
        }
    }
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Material::Linear($m) => $e,
            Material::Nonlinear($m) => $e,
        }
    };
}

impl ThermoElasticMaterial for Material {
    fn dim(&self) -> usize {
        delegate!(self, m => m.dim())
    }
    fn density(&self) -> f64 {
        delegate!(self, m => m.density())
    }
    fn reference_temperature(&self) -> f64 {
        delegate!(self, m => m.reference_temperature())
    }
    fn reference_entropy(&self) -> f64 {
        delegate!(self, m => m.reference_entropy())
    }
    fn free_energy(&self, f: &Tensor, beta: &Vector, theta: f64) -> Result<f64, MaterialError> {
        delegate!(self, m => m.free_energy(f, beta, theta))
    }
    fn stress(&self, f: &Tensor, beta: &Vector, theta: f64) -> Result<Tensor, MaterialError> {
        delegate!(self, m => m.stress(f, beta, theta))
    }
    fn entropy(&self, f: &Tensor, theta: f64) -> Result<f64, MaterialError> {
        delegate!(self, m => m.entropy(f, theta))
    }
    fn entropy_slope(&self, f: &Tensor, theta: f64) -> Result<f64, MaterialError> {
        delegate!(self, m => m.entropy_slope(f, theta))
    }
    fn entropy_flux(&self, beta: &Vector) -> Vector {
        delegate!(self, m => m.entropy_flux(beta))
    }
    fn invert_mean_entropy(
        &self,
        samples: &[(f64, Tensor)],
        target: f64,
    ) -> Result<f64, MaterialError> {
        delegate!(self, m => m.invert_mean_entropy(samples, target))
    }
}
