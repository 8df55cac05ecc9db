//! Netlists, nodal analysis, Kron reduction, planar duals and builders.

pub mod builders;
pub mod kron;
pub mod mna;
pub mod netlist;
pub mod planar;

pub use builders::*;
pub use kron::{check_laplacian, kron_reduce};
pub use mna::{descriptor_to_statespace, descriptor_transfer, impedance_at, mna_descriptor, Descriptor, Drive};
pub use netlist::{parse_netlist, Element, ElementKind, Netlist, Port, GROUND};
pub use planar::{isomorphic, open_circuit_capacitors, planar_dual, prune_hanging, validate_embedding};
