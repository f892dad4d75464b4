//! Two-strain viral competition: free and treated dynamics, closed-form
//! equilibrium analysis, fixed-step integrators, and optimal dosing via a
//! forward-backward sweep with an exterior-penalty path for state bounds.

pub mod equilibria;
pub mod integrate;
pub mod model;
pub mod ocp;
pub mod portrait;
pub mod scenario;
pub mod trajectory_csv;
pub mod verify;
