use std::io::{self, Write};

use augopf_core::case::NetworkCase;
use augopf_core::powerflow::AdmittanceMatrix;

/// Sparse Y-bus dump, one `row col re im` line per stored entry with
/// external bus ids, in row-major order.
pub fn write_ybus_triplets<W: Write>(case: &NetworkCase, y: &AdmittanceMatrix, mut out: W) -> io::Result<()> {
    writeln!(out, "# row col re im")?;
    for (i, j, v) in y.triplets() {
        let (a, b) = (case.buses[i].external_id, case.buses[j].external_id);
        writeln!(out, "{a} {b} {} {}", v.re, v.im)?;
    }
    Ok(())
}
