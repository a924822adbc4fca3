//! Optional debug export of the solver's complex intermediates.
//!
//! One file per object (all integers little-endian):
//!
//! ```text
//! magic   b"EMCF"
//! u32     format version (currently 1)
//! u32     header length
//! [u8]    header JSON: {kind, rows, cols, k0, freq_hz, tx}
//! payload rows*cols complex values as f64 LE pairs (re, im)
//! u32     CRC32 of every preceding byte
//! ```
//!
//! `kind` is one of `green-domain-kernel` (rows = cols = 2*grid_n - 1
//! displacement table), `green-receiver`, `incident`, `total`, `scattered`.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde_json::json;

use crate::error::Result;
use crate::scene::{make_array_layout, make_grid, ContrastImage, SceneConfig};
use crate::scene::image_to_contrast;

use super::{
    green_domain_matrix, green_receiver_matrix, incident_field, scattered_field,
    solve_total_field, SolverOptions,
};

const MAGIC: &[u8; 4] = b"EMCF";
const VERSION: u32 = 1;

fn write_complex_file(
    path: &Path,
    kind: &str,
    rows: usize,
    cols: usize,
    k0: f64,
    freq_hz: f64,
    tx: Option<usize>,
    values: &[Complex64],
) -> Result<()> {
    debug_assert_eq!(values.len(), rows * cols);
    let header = serde_json::to_vec(&json!({
        "kind": kind,
        "rows": rows,
        "cols": cols,
        "k0": k0,
        "freq_hz": freq_hz,
        "tx": tx,
    }))?;
    let mut out = Vec::with_capacity(16 + header.len() + values.len() * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

/// Dump every complex intermediate of one simulation: the Green kernel and
/// receiver matrix per frequency, and the incident/total/scattered fields
/// per (frequency, transmitter).
pub fn dump_simulation(
    dir: &Path,
    img: &ContrastImage,
    scene: &SceneConfig,
    opts: &SolverOptions,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let grid = make_grid(scene)?;
    let layout = make_array_layout(scene)?;
    let tau = image_to_contrast(img)?;
    for (fi, &freq) in scene.frequencies_hz.iter().enumerate() {
        let k0 = scene.wavenumber(freq);
        let gd = green_domain_matrix(&grid, k0)?;
        let span = 2 * scene.grid_n - 1;
        let kernel: Vec<Complex64> = (0..span)
            .flat_map(|r| {
                (0..span).map(move |c| (r as i64 - (scene.grid_n as i64 - 1), c as i64 - (scene.grid_n as i64 - 1)))
            })
            .map(|(dr, dc)| gd.kernel_at(dr, dc))
            .collect();
        write_complex_file(
            &dir.join(format!("green-domain-kernel-f{fi}.emcf")),
            "green-domain-kernel",
            span,
            span,
            k0,
            freq,
            None,
            &kernel,
        )?;
        let gr = green_receiver_matrix(&grid, &layout, k0)?;
        write_complex_file(
            &dir.join(format!("green-receiver-f{fi}.emcf")),
            "green-receiver",
            gr.n_rx,
            gr.n_cells,
            k0,
            freq,
            None,
            &gr.entries,
        )?;
        for (ti, tx) in layout.tx_positions.iter().enumerate() {
            let e_inc = incident_field(&grid, *tx, k0)?;
            let e_tot = solve_total_field(&gd, &tau, &e_inc, opts)?;
            let e_sca = scattered_field(&gr, &e_tot, &tau)?;
            for (kind, field) in [("incident", &e_inc), ("total", &e_tot), ("scattered", &e_sca)] {
                write_complex_file(
                    &dir.join(format!("{kind}-f{fi}-tx{ti}.emcf")),
                    kind,
                    field.values.len(),
                    1,
                    k0,
                    freq,
                    Some(ti),
                    &field.values,
                )?;
            }
        }
    }
    Ok(())
}
