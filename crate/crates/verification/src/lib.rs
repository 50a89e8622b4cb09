//! Independent checks of the integrators: a classical Runge–Kutta reference
//! for the semi-discrete equations, phase-space flattening for Jacobian
//! tests and small fitting helpers.

use nalgebra::DMatrix;
use thermovi_core::assembly::{
    all_kinematics, deformation_gradients, entropy_flux_divergence, internal_force,
    solve_nodal_temperature,
};
use thermovi_core::{Point, Problem, State, StepError, ThermoElasticMaterial};

/// Phase-space coordinates `(phi, Phi, p, tau)`, with position and momentum
/// blocks paired index by index.
pub fn flatten(dim: usize, state: &State) -> Vec<f64> {
    let q = state
        .motion
        .iter()
        .flat_map(|x| x.iter().take(dim).copied().collect::<Vec<_>>())
        .chain(state.thermal.iter().copied());
    let p = state
        .momentum
        .iter()
        .flat_map(|x| x.iter().take(dim).copied().collect::<Vec<_>>())
        .chain(state.entropy_momentum.iter().copied());
    q.chain(p).collect()
}

/// Inverse of [`flatten`]; temperatures are recovered from the thermal
/// momenta.
pub fn unflatten<M: ThermoElasticMaterial>(
    problem: &Problem<M>,
    time: f64,
    y: &[f64],
) -> Result<State, StepError> {
    let mesh = problem.mesh();
    let (dim, n) = (mesh.dim(), mesh.n_nodes());
    let half = n * (dim + 1);
    assert_eq!(y.len(), 2 * half, "phase-space vector has the wrong length");
    let vectors = |block: &[f64]| -> Vec<Point> {
        block[..n * dim]
            .chunks(dim)
            .map(|c| {
                let mut v = Point::zeros();
                v.iter_mut().zip(c).for_each(|(a, b)| *a = *b);
                v
            })
            .collect()
    };
    let (q, p) = y.split_at(half);
    let motion = vectors(q);
    let entropy_momentum = p[n * dim..].to_vec();
    let temperature = temperatures(problem, &motion, &entropy_momentum)?;
    Ok(State {
        time,
        motion,
        thermal: q[n * dim..].to_vec(),
        momentum: vectors(p),
        entropy_momentum,
        temperature,
    })
}

fn temperatures<M: ThermoElasticMaterial>(
    problem: &Problem<M>,
    motion: &[Point],
    entropy_momentum: &[f64],
) -> Result<Vec<f64>, StepError> {
    let mesh = problem.mesh();
    let grads = deformation_gradients(mesh, motion)?;
    (0..mesh.n_nodes())
        .map(|a| {
            Ok(solve_nodal_temperature(
                mesh,
                problem.model(),
                &grads,
                a,
                entropy_momentum[a],
            )?)
        })
        .collect()
}

/// Right-hand side of the lumped semi-discrete equations
/// `phi' = p/m, Phi' = theta(tau), p' = -S + B, tau' = H + Q`, in the layout
/// of [`flatten`]. Boundary constraints are not imposed.
pub fn vector_field<M: ThermoElasticMaterial>(
    problem: &Problem<M>,
    state: &State,
) -> Result<Vec<f64>, StepError> {
    let mesh = problem.mesh();
    let model = problem.model();
    let dim = mesh.dim();
    let theta = temperatures(problem, &state.motion, &state.entropy_momentum)?;
    let kin = all_kinematics(mesh, &state.motion, &state.thermal)?;
    let stress = internal_force(mesh, model, &kin, &theta)?;
    let flux = entropy_flux_divergence(mesh, model, &kin)?;
    let forces = problem.external_force(state.time, state.time);
    let sources = problem.entropy_source(state.time, state.time);

    let velocity = state
        .momentum
        .iter()
        .zip(problem.mass())
        .map(|(p, m)| p / *m);
    let mut out: Vec<f64> = velocity
        .flat_map(|v| v.iter().take(dim).copied().collect::<Vec<_>>())
        .collect();
    out.extend(&theta);
    out.extend(
        stress
            .iter()
            .zip(&forces)
            .flat_map(|(s, b)| (b - s).iter().take(dim).copied().collect::<Vec<_>>()),
    );
    out.extend(flux.iter().zip(&sources).map(|(h, q)| h + q));
    Ok(out)
}

/// Classical fourth-order Runge–Kutta over `dt` in `substeps` equal steps.
pub fn rk4<M: ThermoElasticMaterial>(
    problem: &Problem<M>,
    state: &State,
    dt: f64,
    substeps: usize,
) -> Result<State, StepError> {
    let dim = problem.mesh().dim();
    let h = dt / substeps as f64;
    let mut t = state.time;
    let mut y = flatten(dim, state);
    let axpy = |y: &[f64], a: f64, k: &[f64]| -> Vec<f64> {
        y.iter().zip(k).map(|(y, k)| y + a * k).collect()
    };
    let f = |t: f64, y: &[f64]| -> Result<Vec<f64>, StepError> {
        vector_field(problem, &unflatten(problem, t, y)?)
    };
    for _ in 0..substeps {
        let k1 = f(t, &y)?;
        let k2 = f(t + h / 2.0, &axpy(&y, h / 2.0, &k1))?;
        let k3 = f(t + h / 2.0, &axpy(&y, h / 2.0, &k2))?;
        let k4 = f(t + h, &axpy(&y, h, &k3))?;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    unflatten(problem, state.time + dt, &y)
}

/// Central-difference Jacobian of `map` at `x`.
pub fn jacobian<F, E>(map: F, x: &[f64], step: f64) -> Result<DMatrix<f64>, E>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = step * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let plus = map(&probe)?;
        probe[j] = x[j] - h;
        let minus = map(&probe)?;
        probe[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Canonical symplectic matrix `[[0, I], [-I, 0]]` of size `2n`.
pub fn canonical_form(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if j == i + n {
            1.0
        } else if i == j + n {
            -1.0
        } else {
            0.0
        }
    })
}

/// Largest entry of `J^T Omega J - Omega`.
pub fn symplectic_defect(jac: &DMatrix<f64>) -> f64 {
    let omega = canonical_form(jac.nrows() / 2);
    (jac.transpose() * &omega * jac - omega).amax()
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// Largest field-wise relative difference between two states, each field
/// scaled by its largest magnitude in `a`.
pub fn relative_difference(a: &State, b: &State) -> f64 {
    fn vectors(x: &[Point], y: &[Point]) -> f64 {
        let scale = x
            .iter()
            .map(|v| v.amax())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        x.iter()
            .zip(y)
            .map(|(u, v)| (u - v).amax())
            .fold(0.0, f64::max)
            / scale
    }
    fn scalars(x: &[f64], y: &[f64]) -> f64 {
        let scale = x
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        x.iter()
            .zip(y)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max)
            / scale
    }
    [
        vectors(&a.motion, &b.motion),
        vectors(&a.momentum, &b.momentum),
        scalars(&a.thermal, &b.thermal),
        scalars(&a.entropy_momentum, &b.entropy_momentum),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_is_itself_symplectic() {
        let omega = canonical_form(3);
        assert_eq!(symplectic_defect(&DMatrix::identity(6, 6)), 0.0);
        assert_eq!(symplectic_defect(&omega), 0.0);
        assert_eq!(symplectic_defect(&(DMatrix::identity(6, 6) * 2.0)), 3.0);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.1, 0.2, 0.4, 0.8];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(3)).collect();
        assert!((log_log_slope(&x, &y) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jacobian_of_linear_map() {
        let map = |x: &[f64]| -> Result<Vec<f64>, ()> { Ok(vec![2.0 * x[0] + x[1], -x[0]]) };
        let j = jacobian(map, &[0.3, 5.0], 1e-4).unwrap();
        assert!((j - DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 0.0])).amax() < 1e-10);
    }
}
