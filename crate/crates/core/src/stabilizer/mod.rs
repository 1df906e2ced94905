//! Mixed-state stabilizer simulation: Pauli strings, local Clifford gates,
//! boundary channels and GF(2)-rank entropies.

mod clifford;
mod pauli;
mod state;

pub use clifford::{
    clifford2_table, sample_clifford2_ref, sample_uniform_clifford1, sample_uniform_clifford2, symplectic_from_index,
    symplectic_index, CliffordGate1, CliffordGate2, CLIFFORD2_ORDER, SYMPLECTIC1_ORDER, SYMPLECTIC2_ORDER,
};
pub use pauli::{Pauli, PauliString};
pub use state::{QubitRole, Region, StabilizerState};
