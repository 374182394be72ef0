//! CSV writers for trajectories, level sets, crossings and exponents.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

use crate::baker::BakerSystem;
use crate::classify::ExponentRow;
use crate::error::Result;
use crate::fibre::FibreFamily;
use crate::strips::two_step;

pub type CsvWriter = csv::Writer<BufWriter<File>>;

pub fn csv_writer(path: &Path, header: &[&str]) -> Result<CsvWriter> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    Ok(w)
}

pub const TRAJECTORY_HEADER: [&str; 4] = ["step", "xi", "x", "y"];
pub const CROSSING_HEADER: [&str; 4] = ["start_y", "step", "y_before", "y_after"];
pub const LEVELSET_HEADER: [&str; 4] = ["x", "y", "g", "below"];
pub const LYAPUNOV_HEADER: [&str; 6] = ["scenario", "graph", "measure", "value", "stderr", "n"];

/// Level set of `g(x, y) = f_x(f_{tau x}(y))`: `below` is 1 where `g < y`.
pub fn write_levelset<F: FibreFamily + ?Sized>(
    path: &Path,
    fam: &F,
    sys: &BakerSystem,
    nx: usize,
    ny: usize,
    y_max: f64,
) -> Result<()> {
    let rows: Vec<Vec<[f64; 3]>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 / nx as f64;
            (0..ny)
                .map(|k| {
                    let y = -y_max + 2.0 * y_max * k as f64 / (ny - 1) as f64;
                    [x, y, two_step(fam, sys, x, y).0]
                })
                .collect()
        })
        .collect();
    let mut w = csv_writer(path, &LEVELSET_HEADER)?;
    for [x, y, g] in rows.into_iter().flatten() {
        w.write_record([x.to_string(), y.to_string(), g.to_string(), u8::from(g < y).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_exponents(path: &Path, scenario: &str, rows: &[ExponentRow]) -> Result<()> {
    let mut w = csv_writer(path, &LYAPUNOV_HEADER)?;
    for r in rows {
        w.write_record([
            scenario.to_string(),
            r.graph.to_string(),
            r.measure.clone(),
            r.value.to_string(),
            r.stderr.to_string(),
            r.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
