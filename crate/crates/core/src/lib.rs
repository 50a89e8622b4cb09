//! Explicit variational integrators for thermo-elastic solids without energy
//! dissipation, discretized with linear simplicial finite elements.

pub mod assembly;
pub mod diagnostics;
pub mod integrator;
pub mod material;
pub mod mesh;

pub use diagnostics::{DiagnosticsRecord, FieldErrors, HarmonicReference};
pub use integrator::{BoundaryConditions, Prescribed, Problem, Scheme, State, StepError};
pub use material::{
    LinearThermoElastic, Material, NonlinearThermoElastic, ThermalParameters, ThermoElasticMaterial,
};
pub use mesh::{BoundaryLabels, Mesh, Point};
