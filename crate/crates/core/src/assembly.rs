//! Nodal operators of the lumped (Gauss–Lobatto) P1 discretization.
//!
//! Volume integrals use the nodal rule with weight `Vol(K)/(d+1)` per element
//! node; facet integrals use the analogous rule with `Area/d` per facet node.
//! Deformation gradients and thermal gradients are element-constant, so the
//! only field varying inside an element is the nodal temperature.

use nalgebra::Vector3;
use thiserror::Error;

use crate::material::{MaterialError, Tensor, ThermoElasticMaterial, Vector};
use crate::mesh::{BoundaryLabels, Mesh, MeshError, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("element {element}: {source}")]
    Element {
        element: usize,
        #[source]
        source: MaterialError,
    },
    #[error("node {node}: {source}")]
    Node {
        node: usize,
        #[source]
        source: MaterialError,
    },
    #[error("{field} has {found} entries, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("model dimension {model} does not match mesh dimension {mesh}")]
    DimensionMismatch { model: usize, mesh: usize },
    #[error("non-finite value in {field} at node {node}")]
    NonFinite { field: &'static str, node: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

impl AssemblyError {
    /// The underlying constitutive failure, if any.
    pub fn material_error(&self) -> Option<&MaterialError> {
        match self {
            AssemblyError::Element { source, .. } | AssemblyError::Node { source, .. } => {
                Some(source)
            }
            _ => None,
        }
    }
}

pub(crate) fn check_len(
    field: &'static str,
    expected: usize,
    found: usize,
) -> Result<(), AssemblyError> {
    if expected == found {
        Ok(())
    } else {
        Err(AssemblyError::LengthMismatch {
            field,
            expected,
            found,
        })
    }
}

pub(crate) fn check_model(
    mesh: &Mesh,
    model: &dyn ThermoElasticMaterial,
) -> Result<(), AssemblyError> {
    if model.dim() == mesh.dim() {
        Ok(())
    } else {
        Err(AssemblyError::DimensionMismatch {
            model: model.dim(),
            mesh: mesh.dim(),
        })
    }
}

/// Element-constant deformation gradient and thermal-displacement gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementKinematics {
    pub deformation: Tensor,
    pub thermal_gradient: Vector,
}

/// Kinematics of element `k`. The deformation gradient is padded with the
/// identity beyond the mesh dimension.
pub fn element_kinematics(
    mesh: &Mesh,
    k: usize,
    motion: &[Point],
    thermal: &[f64],
) -> ElementKinematics {
    let geom = &mesh.geometry()[k];
    let coords = mesh.coords();
    let mut deformation = Tensor::identity();
    let mut thermal_gradient = Vector::zeros();
    for (&a, grad) in mesh.element(k).iter().zip(geom.gradients()) {
        // Summing displacements rather than positions keeps small strains
        // free of cancellation.
        deformation += (motion[a] - coords[a]) * grad.transpose();
        thermal_gradient += thermal[a] * grad;
    }
    ElementKinematics {
        deformation,
        thermal_gradient,
    }
}

/// Kinematics of every element.
pub fn all_kinematics(
    mesh: &Mesh,
    motion: &[Point],
    thermal: &[f64],
) -> Result<Vec<ElementKinematics>, AssemblyError> {
    check_len("motion", mesh.n_nodes(), motion.len())?;
    check_len("thermal displacement", mesh.n_nodes(), thermal.len())?;
    Ok((0..mesh.n_elements())
        .map(|k| element_kinematics(mesh, k, motion, thermal))
        .collect())
}

/// Deformation gradients only; the thermal field is irrelevant to them.
pub fn deformation_gradients(mesh: &Mesh, motion: &[Point]) -> Result<Vec<Tensor>, AssemblyError> {
    check_len("motion", mesh.n_nodes(), motion.len())?;
    let zeros = vec![0.0; mesh.n_nodes()];
    Ok((0..mesh.n_elements())
        .map(|k| element_kinematics(mesh, k, motion, &zeros).deformation)
        .collect())
}

/// Diagonal of the lumped mass matrix.
pub fn lumped_mass(mesh: &Mesh, model: &dyn ThermoElasticMaterial) -> Vec<f64> {
    let rho0 = model.density();
    mesh.lumped_weights()
        .per_node
        .iter()
        .map(|w| rho0 * w)
        .collect()
}

/// Internal forces `S_a`, with the stress averaged over the nodal
/// temperatures of each element.
pub fn internal_force(
    mesh: &Mesh,
    model: &dyn ThermoElasticMaterial,
    kinematics: &[ElementKinematics],
    rates: &[f64],
) -> Result<Vec<Point>, AssemblyError> {
    check_model(mesh, model)?;
    check_len("element kinematics", mesh.n_elements(), kinematics.len())?;
    check_len("temperature", mesh.n_nodes(), rates.len())?;
    let mut force = vec![Point::zeros(); mesh.n_nodes()];
    let weights = &mesh.lumped_weights().per_element;
    for (k, kin) in kinematics.iter().enumerate() {
        let nodes = mesh.element(k);
        let mut stress = Tensor::zeros();
        for &b in nodes {
            stress += weights[k]
                * model
                    .stress(&kin.deformation, &kin.thermal_gradient, rates[b])
                    .map_err(|source| AssemblyError::Element { element: k, source })?;
        }
        for (&a, grad) in nodes.iter().zip(mesh.geometry()[k].gradients()) {
            force[a] += stress * grad;
        }
    }
    Ok(force)
}

/// Entropy-flux divergences `H_a`. They sum to zero over the mesh.
pub fn entropy_flux_divergence(
    mesh: &Mesh,
    model: &dyn ThermoElasticMaterial,
    kinematics: &[ElementKinematics],
) -> Result<Vec<f64>, AssemblyError> {
    check_model(mesh, model)?;
    check_len("element kinematics", mesh.n_elements(), kinematics.len())?;
    let mut div = vec![0.0; mesh.n_nodes()];
    for (k, kin) in kinematics.iter().enumerate() {
        let geom = &mesh.geometry()[k];
        let flux = geom.volume * model.entropy_flux(&kin.thermal_gradient);
        for (&a, grad) in mesh.element(k).iter().zip(geom.gradients()) {
            div[a] += flux.dot(grad);
        }
    }
    Ok(div)
}

/// Thermal momentum `Upsilon_a` of one node at nodal temperature `theta`.
pub fn thermal_momentum(
    mesh: &Mesh,
    model: &dyn ThermoElasticMaterial,
    deformation: &[Tensor],
    node: usize,
    theta: f64,
) -> Result<f64, AssemblyError> {
    let weights = &mesh.lumped_weights().per_element;
    let mut sum = 0.0;
    for &k in mesh.ring(node)? {
        let eta = model
            .entropy(&deformation[k], theta)
            .map_err(|source| AssemblyError::Element { element: k, source })?;
        sum += weights[k] * eta;
    }
    Ok(model.density() * sum)
}

/// Thermal momenta of all nodes.
pub fn thermal_momenta(
    mesh: &Mesh,
    model: &dyn ThermoElasticMaterial,
    deformation: &[Tensor],
    temperatures: &[f64],
) -> Result<Vec<f64>, AssemblyError> {
    check_len(
        "deformation gradients",
        mesh.n_elements(),
        deformation.len(),
    )?;
    check_len("temperature", mesh.n_nodes(), temperatures.len())?;
    (0..mesh.n_nodes())
        .map(|a| thermal_momentum(mesh, model, deformation, a, temperatures[a]))
        .collect()
}

/// Solves `Upsilon_a(theta) = target` for the nodal temperature.
pub fn solve_nodal_temperature(
    mesh: &Mesh,
    model: &dyn ThermoElasticMaterial,
    deformation: &[Tensor],
    node: usize,
    target: f64,
) -> Result<f64, AssemblyError> {
    if !target.is_finite() {
        return Err(AssemblyError::NonFinite {
            field: "thermal momentum",
            node,
        });
    }
    let weights = &mesh.lumped_weights().per_element;
    let samples: Vec<(f64, Tensor)> = mesh
        .ring(node)?
        .iter()
        .map(|&k| (weights[k], deformation[k]))
        .collect();
    let mean_entropy = target / (model.density() * mesh.lumped_weights().per_node[node]);
    model
        .invert_mean_entropy(&samples, mean_entropy)
        .map_err(|source| AssemblyError::Node { node, source })
}

/// Calls `visit(node, share)` for every node of every boundary facet carrying
/// any of `labels`, where `share` is that node's quadrature weight.
pub fn for_each_facet_node<F>(mesh: &Mesh, labels: BoundaryLabels, mut visit: F)
where
    F: FnMut(usize, f64),
{
    let per_node = 1.0 / mesh.dim() as f64;
    for f in 0..mesh.n_facets() {
        if mesh.facet_labels(f).intersects(labels) {
            let share = mesh.facet_measure(f) * per_node;
            mesh.facet(f).iter().for_each(|&a| visit(a, share));
        }
    }
}

/// Dead loads: uniform body force per unit mass and a traction on facets
/// labelled [`BoundaryLabels::TRACTION`].
pub fn external_force<T>(
    mesh: &Mesh,
    model: &dyn ThermoElasticMaterial,
    body_force: &Vector3<f64>,
    traction: T,
) -> Vec<Point>
where
    T: Fn(&Point) -> Vector3<f64>,
{
    let rho0 = model.density();
    let mut force: Vec<Point> = mesh
        .lumped_weights()
        .per_node
        .iter()
        .map(|w| w * rho0 * body_force)
        .collect();
    for_each_facet_node(mesh, BoundaryLabels::TRACTION, |a, share| {
        force[a] += share * traction(&mesh.coords()[a]);
    });
    let dim = mesh.dim();
    force
        .iter_mut()
        .for_each(|f| f.iter_mut().skip(dim).for_each(|c| *c = 0.0));
    force
}

/// Entropy sources: a uniform volumetric source per unit mass and an influx
/// on facets labelled [`BoundaryLabels::ENTROPY_FLUX`].
pub fn entropy_source<H>(
    mesh: &Mesh,
    model: &dyn ThermoElasticMaterial,
    volumetric: f64,
    influx: H,
) -> Vec<f64>
where
    H: Fn(&Point) -> f64,
{
    let rho0 = model.density();
    let mut source: Vec<f64> = mesh
        .lumped_weights()
        .per_node
        .iter()
        .map(|w| w * rho0 * volumetric)
        .collect();
    for_each_facet_node(mesh, BoundaryLabels::ENTROPY_FLUX, |a, share| {
        source[a] += share * influx(&mesh.coords()[a]);
    });
    source
}

/// Stored energy `W_h = rho0 sum_K sum_{a in K} w_{a,K} A(F_K, beta_K, theta_a)`.
pub fn stored_energy(
    mesh: &Mesh,
    model: &dyn ThermoElasticMaterial,
    kinematics: &[ElementKinematics],
    temperatures: &[f64],
) -> Result<f64, AssemblyError> {
    check_len("element kinematics", mesh.n_elements(), kinematics.len())?;
    check_len("temperature", mesh.n_nodes(), temperatures.len())?;
    let weights = &mesh.lumped_weights().per_element;
    let mut sum = 0.0;
    for (k, kin) in kinematics.iter().enumerate() {
        for &a in mesh.element(k) {
            sum += weights[k]
                * model
                    .free_energy(&kin.deformation, &kin.thermal_gradient, temperatures[a])
                    .map_err(|source| AssemblyError::Element { element: k, source })?;
        }
    }
    Ok(model.density() * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{LinearThermoElastic, NonlinearThermoElastic, ThermalParameters};
    use crate::mesh::{generate_box_tet_mesh, generate_rectangle_tri_mesh, generate_segment_mesh};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn params() -> ThermalParameters {
        ThermalParameters {
            specific_heat: 0.1,
            coupling: 0.1,
            conductivity: 0.1,
            density: 1.0,
            reference_temperature: 10.0,
            reference_entropy: 0.0,
        }
    }

    fn bar() -> LinearThermoElastic {
        LinearThermoElastic::uniaxial(20.0, params()).unwrap()
    }

    fn nonlinear(dim: usize) -> NonlinearThermoElastic {
        NonlinearThermoElastic::new(
            dim,
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
    fn lumped_mass_examples() {
        let mesh = generate_segment_mesh(10.0, 5).unwrap();
        let m = lumped_mass(&mesh, &bar());
        assert_relative_eq!(m[2], 2.0, max_relative = 1e-14);
        assert_relative_eq!(m[0], 1.0, max_relative = 1e-14);

        let tet = crate::mesh::Mesh::new(
            3,
            vec![Point::zeros(), Point::x(), Point::y(), Point::z()],
            vec![vec![0, 1, 2, 3]],
        )
        .unwrap();
        let m = lumped_mass(&tet, &nonlinear(3));
        m.iter()
            .for_each(|&v| assert_relative_eq!(v, 1.5 / 24.0, max_relative = 1e-14));

        let mesh = generate_box_tet_mesh([2.0, 1.0, 3.0], [3, 2, 2]).unwrap();
        let total: f64 = lumped_mass(&mesh, &nonlinear(3)).iter().sum();
        assert_relative_eq!(total, 1.5 * 6.0, max_relative = 1e-12);
    }

    #[test]
    fn stretched_unit_bar() {
        let mesh = generate_segment_mesh(1.0, 1).unwrap();
        let motion = vec![Point::zeros(), Point::new(1.01, 0.0, 0.0)];
        let kin = all_kinematics(&mesh, &motion, &[0.0, 0.0]).unwrap();
        let s = internal_force(&mesh, &bar(), &kin, &[10.0, 10.0]).unwrap();
        assert_relative_eq!(s[0].x, -0.2, max_relative = 1e-10);
        assert_relative_eq!(s[1].x, 0.2, max_relative = 1e-10);
    }

    #[test]
    fn constant_stress_patch_in_1d() {
        let mesh = generate_segment_mesh(2.0, 2).unwrap();
        let motion: Vec<Point> = mesh.coords().iter().map(|x| 1.003 * x).collect();
        let kin = all_kinematics(&mesh, &motion, &[0.0; 3]).unwrap();
        let s = internal_force(&mesh, &bar(), &kin, &[10.0; 3]).unwrap();
        assert!(s[1].norm() < 1e-14);
    }

    #[test]
    fn flux_divergence_matches_laplacian_stencil() {
        let h = 0.5;
        let mesh = generate_segment_mesh(6.0 * h, 6).unwrap();
        let thermal = [0.3, -1.2, 2.0, 0.7, 0.1, 4.0, -0.5];
        let motion = mesh.coords().to_vec();
        let kin = all_kinematics(&mesh, &motion, &thermal).unwrap();
        let div = entropy_flux_divergence(&mesh, &bar(), &kin).unwrap();
        for a in 1..6 {
            let stencil = 0.1 * (thermal[a - 1] - 2.0 * thermal[a] + thermal[a + 1]) / h;
            assert_relative_eq!(div[a], stencil, max_relative = 1e-12);
        }
        assert!(div.iter().sum::<f64>().abs() < 1e-13);
    }

    #[test]
    fn thermal_momentum_examples() {
        let h = 2.0;
        let mesh = generate_segment_mesh(4.0 * h, 4).unwrap();
        let motion = mesh.coords().to_vec();
        let f = deformation_gradients(&mesh, &motion).unwrap();
        let y = thermal_momentum(&mesh, &bar(), &f, 2, 11.0).unwrap();
        assert_relative_eq!(y, h * 0.01, max_relative = 1e-12);
        let theta = solve_nodal_temperature(&mesh, &bar(), &f, 2, y).unwrap();
        assert_relative_eq!(theta, 11.0, max_relative = 1e-12);

        let model = nonlinear(1);
        let target = 1.5 * h * (10.0 + 5.0 * 2f64.ln());
        let theta = solve_nodal_temperature(&mesh, &model, &f, 2, target).unwrap();
        assert_relative_eq!(theta, 20.0, max_relative = 1e-12);
        let reference = thermal_momentum(&mesh, &model, &f, 1, 10.0).unwrap();
        assert_relative_eq!(reference, 1.5 * h * 10.0, max_relative = 1e-14);
    }

    #[test]
    fn nodal_rule_for_loads() {
        let mut mesh = generate_box_tet_mesh([1.0, 1.0, 1.0], [2, 2, 2]).unwrap();
        mesh.label_facets(
            BoundaryLabels::TRACTION | BoundaryLabels::ENTROPY_FLUX,
            |x| x.x == 1.0,
        );
        let t = Vector3::new(0.5, -1.0, 2.0);
        let b = external_force(&mesh, &nonlinear(3), &Vector3::zeros(), |_| t);
        let total: Point = b.iter().sum();
        assert_relative_eq!(total, t, max_relative = 1e-12);
        let q = entropy_source(&mesh, &nonlinear(3), 0.0, |_| 1.0);
        assert_relative_eq!(q.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
        let q = entropy_source(&mesh, &nonlinear(3), 2.0, |_| 0.0);
        assert_relative_eq!(q.iter().sum::<f64>(), 1.5 * 2.0, max_relative = 1e-12);

        let seg = generate_segment_mesh(4.0, 4).unwrap();
        let g = Vector3::new(-9.81, 0.0, 0.0);
        let b = external_force(&seg, &bar(), &g, |_| Vector3::zeros());
        assert_relative_eq!(b[2].x, -9.81, max_relative = 1e-14);
    }

    fn perturbed_state(
        mesh: &Mesh,
        rng: &mut StdRng,
        scale: f64,
    ) -> (Vec<Point>, Vec<f64>, Vec<f64>) {
        let dim = mesh.dim();
        let motion = mesh
            .coords()
            .iter()
            .map(|x| {
                let mut p = *x;
                for i in 0..dim {
                    p[i] += scale * rng.gen_range(-1.0..1.0);
                }
                p
            })
            .collect();
        let thermal = (0..mesh.n_nodes())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let temps = (0..mesh.n_nodes())
            .map(|_| 10.0 + rng.gen_range(-1.0..1.0))
            .collect();
        (motion, thermal, temps)
    }

    #[test]
    fn forces_are_gradients_of_stored_energy() {
        let mut rng = StdRng::seed_from_u64(7);
        let mesh = generate_box_tet_mesh([1.0, 1.0, 1.0], [2, 1, 1]).unwrap();
        let model = nonlinear(3);
        let (motion, thermal, temps) = perturbed_state(&mesh, &mut rng, 0.03);
        let kin = all_kinematics(&mesh, &motion, &thermal).unwrap();
        let s = internal_force(&mesh, &model, &kin, &temps).unwrap();
        let h = entropy_flux_divergence(&mesh, &model, &kin).unwrap();
        let energy = |m: &[Point], t: &[f64]| {
            let kin = all_kinematics(&mesh, m, t).unwrap();
            stored_energy(&mesh, &model, &kin, &temps).unwrap()
        };
        let d = 1e-6;
        for a in 0..mesh.n_nodes() {
            for i in 0..3 {
                let (mut plus, mut minus) = (motion.clone(), motion.clone());
                plus[a][i] += d;
                minus[a][i] -= d;
                let fd = (energy(&plus, &thermal) - energy(&minus, &thermal)) / (2.0 * d);
                assert!(
                    (fd - s[a][i]).abs() <= 1e-5 * s[a][i].abs().max(1.0),
                    "S[{a}][{i}]"
                );
            }
            let (mut plus, mut minus) = (thermal.clone(), thermal.clone());
            plus[a] += d;
            minus[a] -= d;
            let fd = (energy(&motion, &plus) - energy(&motion, &minus)) / (2.0 * d);
            // dW/dPhi_a = -H_a
            assert!((fd + h[a]).abs() <= 1e-5 * h[a].abs().max(1.0), "H[{a}]");
        }
    }

    #[test]
    fn patch_test_in_two_and_three_dimensions() {
        let grad = Tensor::new(1.02, 0.01, 0.0, -0.005, 0.99, 0.0, 0.0, 0.0, 1.0);
        let beta = Vector::new(0.2, -0.1, 0.0);
        let mesh = generate_rectangle_tri_mesh([2.0, 1.0], [4, 3]).unwrap();
        check_patch(
            &mesh,
            &LinearThermoElastic::isotropic(2, 3.0, 2.0, params()).unwrap(),
            &grad,
            &beta,
        );
        check_patch(&mesh, &nonlinear(2), &grad, &beta);
        let mut grad3 = grad;
        grad3[(2, 1)] = 0.02;
        let mesh = generate_box_tet_mesh([1.0, 1.0, 2.0], [2, 2, 3]).unwrap();
        check_patch(&mesh, &nonlinear(3), &grad3, &Vector::new(0.2, -0.1, 0.3));
    }

    fn check_patch(mesh: &Mesh, model: &dyn ThermoElasticMaterial, grad: &Tensor, beta: &Vector) {
        let dim = mesh.dim();
        let motion: Vec<Point> = mesh
            .coords()
            .iter()
            .map(|x| {
                let mut p = grad * x;
                p.iter_mut().skip(dim).for_each(|c| *c = 0.0);
                p
            })
            .collect();
        let thermal: Vec<f64> = mesh.coords().iter().map(|x| beta.dot(x)).collect();
        let kin = all_kinematics(mesh, &motion, &thermal).unwrap();
        let temps = vec![12.0; mesh.n_nodes()];
        let s = internal_force(mesh, model, &kin, &temps).unwrap();
        let h = entropy_flux_divergence(mesh, model, &kin).unwrap();
        let scale = model
            .stress(&kin[0].deformation, beta, 12.0)
            .unwrap()
            .norm()
            .max(1.0);
        let boundary = mesh.labeled_nodes(BoundaryLabels::all());
        let mut interior = 0;
        let mut all = mesh.clone();
        all.label_facets(BoundaryLabels::TRACTION, |_| true);
        let on_boundary = all.labeled_nodes(BoundaryLabels::TRACTION);
        for a in 0..mesh.n_nodes() {
            assert!(!boundary[a]);
            if !on_boundary[a] {
                interior += 1;
                assert!(s[a].norm() < 1e-10 * scale, "node {a}: {}", s[a]);
                assert!(h[a].abs() < 1e-10 * scale);
            }
        }
        assert!(interior > 0);
        let total: Point = s.iter().sum();
        assert!(total.norm() < 1e-10 * scale);
    }

    #[test]
    fn inverted_element_reports_index() {
        let mesh = generate_segment_mesh(2.0, 2).unwrap();
        let motion = vec![
            Point::zeros(),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.5, 0.0, 0.0),
        ];
        let kin = all_kinematics(&mesh, &motion, &[0.0; 3]).unwrap();
        let err = internal_force(&mesh, &nonlinear(1), &kin, &[10.0; 3]).unwrap_err();
        assert!(matches!(
            err,
            AssemblyError::Element {
                element: 1,
                source: MaterialError::InvertedElement { .. }
            }
        ));
    }
}
