//! Debug dump of a QP to a sparse text format, for cross-solver audits.
//!
//! Format (line oriented, `#` comments):
//!
//! ```text
//! regeq-qp-v1
//! vars <n> eq <m_eq> ineq <m_ineq>
//! P <i> <j> <v>      # upper-triangle entries of the 1/2 xᵀPx form
//! q <i> <v>          # nonzero linear costs
//! A <row> <col> <v>  # equality matrix triplets
//! b <row> <v>
//! G <row> <col> <v>  # inequality matrix triplets (Gx <= h)
//! h <row> <v>
//! ```

use std::io::{self, Write};

use super::QuadraticProgram;

pub fn write_dump<W: Write>(qp: &QuadraticProgram, mut w: W) -> io::Result<()> {
    writeln!(w, "regeq-qp-v1")?;
    writeln!(
        w,
        "vars {} eq {} ineq {}",
        qp.num_vars(),
        qp.num_eq(),
        qp.num_ineq()
    )?;
    for (name, range) in qp.vars.blocks() {
        writeln!(w, "# block {name} {}..{}", range.start, range.end)?;
    }
    for (i, j, v) in qp.quad_upper_csc_order() {
        writeln!(w, "P {i} {j} {v}")?;
    }
    for (i, v) in qp.lin_cost().iter().enumerate() {
        if *v != 0.0 {
            writeln!(w, "q {i} {v}")?;
        }
    }
    for &(r, c, v) in &qp.eq.entries {
        writeln!(w, "A {r} {c} {v}")?;
    }
    for (r, v) in qp.eq_rhs.iter().enumerate() {
        writeln!(w, "b {r} {v}")?;
    }
    for &(r, c, v) in &qp.ineq.entries {
        writeln!(w, "G {r} {c} {v}")?;
    }
    for (r, v) in qp.ineq_rhs.iter().enumerate() {
        writeln!(w, "h {r} {v}")?;
    }
    Ok(())
}
