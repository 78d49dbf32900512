pub mod circuit;
pub mod eigen;
pub mod error;
pub mod fermion;
pub mod measurement;
pub mod pauli;
pub mod scan;
pub mod series;
pub mod statevector;
pub mod subspace;
