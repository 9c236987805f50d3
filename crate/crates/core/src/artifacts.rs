//! CSV and JSON artifacts. Column orders are fixed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::llt::SemiLocalReport;
use crate::regen::HarvestedBlock;
use crate::types::RateSeries;

pub const BLOCKS_HEADER: [&str; 5] = ["stream", "index", "length", "sum", "abs_sum"];
pub const RATES_HEADER: [&str; 5] = ["n", "distance", "dkw_bound", "n_paths", "mode"];
pub const LLT_HEADER: [&str; 7] = [
    "n",
    "sup_llt",
    "sup_semilocal",
    "argmax_x",
    "argmax_y",
    "weighted_llt",
    "weighted_semilocal",
];
pub const MIXING_HEADER: [&str; 2] = ["n", "alpha"];

fn csv_writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(w);
    wr.write_record(header)?;
    Ok(wr)
}

pub fn write_blocks_csv<W: Write>(w: W, blocks: &[HarvestedBlock]) -> Result<()> {
    let mut wr = csv_writer(w, &BLOCKS_HEADER)?;
    for b in blocks {
        wr.write_record([
            b.stream.to_string(),
            b.index.to_string(),
            b.sample.length.to_string(),
            b.sample.sum.to_string(),
            b.sample.abs_sum.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_rates_csv<W: Write>(w: W, series: &RateSeries) -> Result<()> {
    let mut wr = csv_writer(w, &RATES_HEADER)?;
    for p in &series.points {
        wr.write_record([
            p.n.to_string(),
            p.distance.to_string(),
            p.dkw_bound.to_string(),
            p.n_paths.to_string(),
            p.mode.as_str().to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// The weighted columns multiply the sups by `n^{(1 + delta) / 2}`.
pub fn write_llt_csv<W: Write>(w: W, reports: &[SemiLocalReport], delta: f64) -> Result<()> {
    let mut wr = csv_writer(w, &LLT_HEADER)?;
    for r in reports {
        let scale = (r.n as f64).powf((1.0 + delta) / 2.0);
        wr.write_record([
            r.n.to_string(),
            r.sup_weighted_llt.to_string(),
            r.sup_weighted_semilocal.to_string(),
            r.argmax_x.to_string(),
            r.argmax_y.to_string(),
            (scale * r.sup_weighted_llt).to_string(),
            (scale * r.sup_weighted_semilocal).to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_mixing_csv<W: Write>(w: W, alphas: &[(u64, f64)]) -> Result<()> {
    let mut wr = csv_writer(w, &MIXING_HEADER)?;
    for (n, a) in alphas {
        wr.write_record([n.to_string(), a.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline. Keys follow struct field order.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn to_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}
