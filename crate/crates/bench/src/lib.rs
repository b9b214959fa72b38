//! Shared fixtures for the benchmarks.

use gpcsim_core::StochasticCircuit;

pub const DIODE: &str = include_str!("../../../docs/netlists/diode_dc.cir");
pub const CS_AMP: &str = include_str!("../../../docs/netlists/cs_amp.cir");
pub const MIXER: &str = include_str!("../../../docs/netlists/db_mixer.cir");
pub const SRAM: &str = include_str!("../../../docs/netlists/sram6t.cir");

/// Parses a shipped netlist; they are known to be valid.
pub fn circuit(text: &str) -> StochasticCircuit {
    StochasticCircuit::from_text(text).expect("shipped netlist parses")
}
