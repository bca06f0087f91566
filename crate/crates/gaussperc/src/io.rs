//! On-disk formats: the `GPF1` binary field format, the `GPM1` run-length
//! mask format, CSV tables (labelings, counts, sweeps, radial profiles),
//! and JSON-lines report streams.
//!
//! `GPF1` layout, all integers little-endian: 8-byte magic `GPFLD001`,
//! `u32` dimension, `u32` vertex count per axis (d entries), `f64` spacing
//! per axis (d entries), `u64` seed, `u16` kernel-id byte length, the
//! kernel-id UTF-8 bytes, then the row-major `f64` values. `GPM1` mirrors
//! the header (magic `GPMSK001`, dimension, counts, spacings), then stores
//! the mask level as `f64`, the source id the same way as the kernel id,
//! and the bits as alternating run lengths (`u64` run count, then that many
//! `u64` lengths, the first run counting leading `false` vertices).

use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde::Serialize;

use crate::burton_keane::SweepRow;
use crate::connectivity::{ExcursionMask, Labeling};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::synthesis::{FieldSample, SynthesisMethod};

const FIELD_MAGIC: &[u8; 8] = b"GPFLD001";
const MASK_MAGIC: &[u8; 8] = b"GPMSK001";

// ---------------------------------------------------------------------
// Little-endian primitives
// ---------------------------------------------------------------------

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> std::io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u16(r: &mut impl Read) -> std::io::Result<u16> {
    Ok(u16::from_le_bytes(read_exact::<2>(r)?))
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    Ok(u32::from_le_bytes(read_exact::<4>(r)?))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<8>(r)?))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<8>(r)?))
}

fn format_err(what: &'static str, detail: impl Into<String>) -> Error {
    Error::Format {
        what,
        detail: detail.into(),
    }
}

/// Fails with a format error when the reader still has bytes left.
fn expect_eof(r: &mut impl Read, what: &'static str) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok(()),
        Ok(_) => Err(format_err(what, "trailing bytes after the payload")),
        Err(e) => Err(format_err(what, format!("probing for EOF: {e}"))),
    }
}

fn write_short_string(w: &mut impl Write, s: &str, what: &'static str) -> Result<()> {
    let bytes = s.as_bytes();
    let len = u16::try_from(bytes.len())
        .map_err(|_| format_err(what, format!("id string of {} bytes exceeds u16", bytes.len())))?;
    w.write_all(&len.to_le_bytes()).map_err(io_unknown)?;
    w.write_all(bytes).map_err(io_unknown)?;
    Ok(())
}

fn read_short_string(r: &mut impl Read, what: &'static str) -> Result<String> {
    let len = read_u16(r).map_err(io_unknown)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(io_unknown)?;
    String::from_utf8(buf).map_err(|e| format_err(what, format!("id is not UTF-8: {e}")))
}

fn io_unknown(e: std::io::Error) -> Error {
    Error::io("<stream>", e)
}

/// Shared `GPF1`/`GPM1` geometry header after the magic.
fn write_grid_header(w: &mut impl Write, grid: &GridSpec) -> std::io::Result<()> {
    write_u32(w, grid.dim() as u32)?;
    for &c in grid.cells() {
        write_u32(w, c as u32)?;
    }
    for &s in grid.spacing() {
        write_f64(w, s)?;
    }
    Ok(())
}

fn read_grid_header(r: &mut impl Read, what: &'static str) -> Result<GridSpec> {
    let d = read_u32(r).map_err(io_unknown)? as usize;
    if d == 0 || d > crate::grid::MAX_DIM {
        return Err(format_err(what, format!("dimension {d} out of range")));
    }
    let mut cells = Vec::with_capacity(d);
    for _ in 0..d {
        cells.push(read_u32(r).map_err(io_unknown)? as usize);
    }
    let mut spacing = Vec::with_capacity(d);
    for _ in 0..d {
        spacing.push(read_f64(r).map_err(io_unknown)?);
    }
    GridSpec::new(cells, spacing)
}

// ---------------------------------------------------------------------
// GPF1 fields
// ---------------------------------------------------------------------

/// Serialize a field sample in the `GPF1` layout.
pub fn write_field_to(w: &mut impl Write, sample: &FieldSample) -> Result<()> {
    w.write_all(FIELD_MAGIC).map_err(io_unknown)?;
    write_grid_header(w, sample.grid()).map_err(io_unknown)?;
    write_u64(w, sample.seed()).map_err(io_unknown)?;
    write_short_string(w, sample.kernel_id(), "GPF1")?;
    for &v in sample.values_flat() {
        write_f64(w, v).map_err(io_unknown)?;
    }
    Ok(())
}

/// Parse a `GPF1` stream. The sample comes back with the external synthesis
/// method: files do not record how their values were produced.
pub fn read_field_from(r: &mut impl Read) -> Result<FieldSample> {
    let magic = read_exact::<8>(r).map_err(io_unknown)?;
    if &magic != FIELD_MAGIC {
        return Err(format_err(
            "GPF1",
            format!("bad magic {:?}", String::from_utf8_lossy(&magic)),
        ));
    }
    let grid = read_grid_header(r, "GPF1")?;
    let seed = read_u64(r).map_err(io_unknown)?;
    let kernel_id = read_short_string(r, "GPF1")?;
    let n = grid.n_vertices();
    let mut values = vec![0.0f64; n];
    for v in &mut values {
        *v = read_f64(r).map_err(io_unknown)?;
    }
    expect_eof(r, "GPF1")?;
    let array = ArrayD::from_shape_vec(IxDyn(grid.cells()), values)
        .map_err(|e| format_err("GPF1", format!("value block: {e}")))?;
    FieldSample::from_values(grid, array, kernel_id, seed, SynthesisMethod::External)
}

pub fn write_field(path: impl AsRef<Path>, sample: &FieldSample) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_field_to(&mut w, sample)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<FieldSample> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_field_from(&mut BufReader::new(file))
}

// ---------------------------------------------------------------------
// GPM1 masks
// ---------------------------------------------------------------------

/// Serialize a mask in the `GPM1` run-length layout.
pub fn write_mask_to(w: &mut impl Write, mask: &ExcursionMask) -> Result<()> {
    w.write_all(MASK_MAGIC).map_err(io_unknown)?;
    write_grid_header(w, mask.grid()).map_err(io_unknown)?;
    write_f64(w, mask.level()).map_err(io_unknown)?;
    write_short_string(w, mask.source(), "GPM1")?;

    let bits = mask.bits();
    let mut runs: Vec<u64> = Vec::new();
    let mut current = false; // the first run counts leading `false` bits
    let mut length = 0u64;
    for &b in bits {
        if b == current {
            length += 1;
        } else {
            runs.push(length);
            current = b;
            length = 1;
        }
    }
    runs.push(length);
    write_u64(w, runs.len() as u64).map_err(io_unknown)?;
    for run in runs {
        write_u64(w, run).map_err(io_unknown)?;
    }
    Ok(())
}

pub fn read_mask_from(r: &mut impl Read) -> Result<ExcursionMask> {
    let magic = read_exact::<8>(r).map_err(io_unknown)?;
    if &magic != MASK_MAGIC {
        return Err(format_err(
            "GPM1",
            format!("bad magic {:?}", String::from_utf8_lossy(&magic)),
        ));
    }
    let grid = read_grid_header(r, "GPM1")?;
    let level = read_f64(r).map_err(io_unknown)?;
    let source = read_short_string(r, "GPM1")?;
    let n_runs = read_u64(r).map_err(io_unknown)? as usize;

    let n = grid.n_vertices();
    let mut bits = Vec::with_capacity(n);
    let mut current = false;
    for i in 0..n_runs {
        let run = read_u64(r).map_err(io_unknown)? as usize;
        if run == 0 && i > 0 {
            return Err(format_err("GPM1", format!("zero-length run at index {i}")));
        }
        if bits.len() + run > n {
            return Err(format_err(
                "GPM1",
                format!("runs cover more than {n} vertices"),
            ));
        }
        bits.resize(bits.len() + run, current);
        current = !current;
    }
    if bits.len() != n {
        return Err(format_err(
            "GPM1",
            format!("runs cover {} of {} vertices", bits.len(), n),
        ));
    }
    expect_eof(r, "GPM1")?;
    ExcursionMask::from_bits(grid, bits, level, source)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &ExcursionMask) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_mask_to(&mut w, mask)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<ExcursionMask> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_mask_from(&mut BufReader::new(file))
}

// ---------------------------------------------------------------------
// CSV tables
// ---------------------------------------------------------------------

/// One row of the component table: id, size, then a low/high touch flag
/// pair per axis (`touch_a0_lo, touch_a0_hi, ...`) encoded as 0/1.
pub fn write_labeling_csv_to(w: &mut impl Write, labeling: &Labeling) -> Result<()> {
    let d = labeling.shape().len();
    let mut header = String::from("component_id,size");
    for axis in 0..d {
        header.push_str(&format!(",touch_a{axis}_lo,touch_a{axis}_hi"));
    }
    writeln!(w, "{header}").map_err(io_unknown)?;
    for info in labeling.components() {
        let mut row = format!("{},{}", info.id, info.size);
        for axis in 0..d {
            row.push_str(&format!(
                ",{},{}",
                u8::from(info.touches[axis][0]),
                u8::from(info.touches[axis][1])
            ));
        }
        writeln!(w, "{row}").map_err(io_unknown)?;
    }
    Ok(())
}

pub fn write_labeling_csv(path: impl AsRef<Path>, labeling: &Labeling) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_labeling_csv_to(&mut w, labeling)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// One observation of the boundary/critical-point counting experiment.
/// `None` marks a count that was not requested; it serializes as an empty
/// CSV cell, never as a fake zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRecord {
    pub box_scale: f64,
    pub sample: u64,
    pub n_boundary: Option<usize>,
    pub n_critical: Option<usize>,
}

fn opt_cell(v: Option<usize>) -> String {
    v.map(|n| n.to_string()).unwrap_or_default()
}

pub fn write_count_csv_to(w: &mut impl Write, rows: &[CountRecord]) -> Result<()> {
    writeln!(w, "L,sample,n_boundary,n_critical").map_err(io_unknown)?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{}",
            row.box_scale,
            row.sample,
            opt_cell(row.n_boundary),
            opt_cell(row.n_critical)
        )
        .map_err(io_unknown)?;
    }
    Ok(())
}

pub fn write_count_csv(path: impl AsRef<Path>, rows: &[CountRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_count_csv_to(&mut w, rows)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sweep_csv_to(w: &mut impl Write, rows: &[SweepRow]) -> Result<()> {
    writeln!(
        w,
        "L,n_samples,lattice_points,mean_t,se_t,mean_boundary,\
         trifurcation_density,boundary_density,violations"
    )
    .map_err(io_unknown)?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            row.l,
            row.n_samples,
            row.lattice_points,
            row.mean_t,
            row.se_t,
            row.mean_boundary,
            row.trifurcation_density,
            row.boundary_density,
            row.violations
        )
        .map_err(io_unknown)?;
    }
    Ok(())
}

pub fn write_sweep_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_sweep_csv_to(&mut w, rows)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Load a two-column `radius,value` CSV into a radial profile. A single
/// non-numeric first row is tolerated as a header; blank lines are skipped.
pub fn load_profile_csv(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let mut profile = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| format_err("profile CSV", format!("record {i}: {e}")))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() < 2 {
            return Err(format_err(
                "profile CSV",
                format!("record {i} has {} fields, expected 2", record.len()),
            ));
        }
        let parsed: std::result::Result<(f64, f64), _> = record[0]
            .parse::<f64>()
            .and_then(|r| record[1].parse::<f64>().map(|v| (r, v)));
        match parsed {
            Ok(pair) => profile.push(pair),
            Err(e) if i == 0 => {
                // Header row; skip it. Anything later must parse.
                let _ = e;
            }
            Err(e) => {
                return Err(format_err(
                    "profile CSV",
                    format!("record {i} ({:?}): {e}", record),
                ))
            }
        }
    }
    if profile.is_empty() {
        return Err(format_err("profile CSV", "no numeric rows"));
    }
    Ok(profile)
}

// ---------------------------------------------------------------------
// JSON lines
// ---------------------------------------------------------------------

/// Append one JSON document as a single line, creating the file if needed.
pub fn append_jsonl(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let line = serde_json::to_string(value)?;
    writeln!(file, "{line}").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::{label_components, Adjacency};
    use crate::kernels::KernelSpec;
    use crate::synthesis::CirculantEmbedding;

    fn sample_2d() -> FieldSample {
        let kernel = KernelSpec::bargmann_fock(1.0, 2).unwrap();
        let grid = GridSpec::centered(2, 6, 0.5).unwrap();
        CirculantEmbedding::plan(&kernel, &grid).unwrap().sample(99)
    }

    #[test]
    fn field_roundtrip_is_bit_exact() {
        let sample = sample_2d();
        let mut buf = Vec::new();
        write_field_to(&mut buf, &sample).unwrap();
        let back = read_field_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.grid(), sample.grid());
        assert_eq!(back.seed(), sample.seed());
        assert_eq!(back.kernel_id(), sample.kernel_id());
        assert_eq!(back.values_flat(), sample.values_flat());
        assert_eq!(back.method(), SynthesisMethod::External);

        // Through an actual file as well.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample.gpf");
        write_field(&path, &sample).unwrap();
        let from_disk = read_field(&path).unwrap();
        assert_eq!(from_disk.values_flat(), sample.values_flat());
    }

    #[test]
    fn field_reader_rejects_corruption() {
        let sample = sample_2d();
        let mut buf = Vec::new();
        write_field_to(&mut buf, &sample).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            read_field_from(&mut bad_magic.as_slice()),
            Err(Error::Format { what: "GPF1", .. })
        ));

        let truncated = &buf[..buf.len() - 3];
        assert!(read_field_from(&mut &truncated[..]).is_err());

        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(matches!(
            read_field_from(&mut trailing.as_slice()),
            Err(Error::Format { what: "GPF1", .. })
        ));
    }

    #[test]
    fn mask_roundtrip_preserves_bits_and_metadata() {
        let sample = sample_2d();
        let mask = crate::connectivity::excursion_mask(&sample, 0.25);
        let mut buf = Vec::new();
        write_mask_to(&mut buf, &mask).unwrap();
        let back = read_mask_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.grid(), mask.grid());
        assert_eq!(back.bits(), mask.bits());
        assert_eq!(back.level(), mask.level());
        assert_eq!(back.source(), mask.source());
    }

    #[test]
    fn mask_roundtrip_handles_constant_masks() {
        let grid = GridSpec::centered(1, 4, 1.0).unwrap();
        for fill in [false, true] {
            let mask =
                ExcursionMask::from_bits(grid.clone(), vec![fill; 9], 0.0, "const").unwrap();
            let mut buf = Vec::new();
            write_mask_to(&mut buf, &mask).unwrap();
            let back = read_mask_from(&mut buf.as_slice()).unwrap();
            assert_eq!(back.bits(), mask.bits());
        }
    }

    #[test]
    fn mask_reader_rejects_bad_run_totals() {
        let grid = GridSpec::centered(1, 2, 1.0).unwrap();
        let mask =
            ExcursionMask::from_bits(grid, vec![true, false, true, false, true], 0.0, "x")
                .unwrap();
        let mut buf = Vec::new();
        write_mask_to(&mut buf, &mask).unwrap();
        // Shrink the final run length (last 8 bytes) so coverage falls short.
        let n = buf.len();
        buf[n - 8..].copy_from_slice(&0u64.to_le_bytes());
        match read_mask_from(&mut buf.as_slice()) {
            Err(Error::Format { what: "GPM1", .. }) => {}
            other => panic!("expected GPM1 format error, got {other:?}"),
        }
    }

    #[test]
    fn labeling_csv_lists_each_component_once() {
        let grid = GridSpec::centered(2, 2, 1.0).unwrap();
        // Two components: left column and bottom-right corner.
        #[rustfmt::skip]
        let rows = [
            "#....",
            "#....",
            "#....",
            ".....",
            "....#",
        ];
        let mut bits = Vec::new();
        for row in rows {
            bits.extend(row.chars().map(|c| c == '#'));
        }
        let mask = ExcursionMask::from_bits(grid, bits, 0.0, "fixture").unwrap();
        let labeling = label_components(&mask, Adjacency::Faces);

        let mut buf = Vec::new();
        write_labeling_csv_to(&mut buf, &labeling).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "component_id,size,touch_a0_lo,touch_a0_hi,touch_a1_lo,touch_a1_hi"
        );
        assert_eq!(lines.len(), 1 + labeling.components().len());
        assert_eq!(labeling.components().len(), 2);
        let sizes: Vec<u64> = lines[1..]
            .iter()
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        let mut sorted = sizes.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![1, 3]);
    }

    #[test]
    fn profile_csv_loads_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let with_header = dir.path().join("profile.csv");
        std::fs::write(&with_header, "radius,value\n0.0,1.0\n1.0,0.5\n2.0,0.1\n").unwrap();
        let profile = load_profile_csv(&with_header).unwrap();
        assert_eq!(profile, vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.1)]);
        // The loaded profile feeds the tabulated kernel constructor.
        assert!(KernelSpec::tabulated(profile, 2).is_ok());

        let bare = dir.path().join("bare.csv");
        std::fs::write(&bare, "0.0, 1.0\n0.5, 0.9\n1.5, 0.2\n").unwrap();
        assert_eq!(load_profile_csv(&bare).unwrap().len(), 3);

        let broken = dir.path().join("broken.csv");
        std::fs::write(&broken, "0.0,1.0\nnot,numbers\n").unwrap();
        assert!(matches!(
            load_profile_csv(&broken),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn count_and_sweep_tables_roundtrip_through_text() {
        let rows = vec![
            CountRecord {
                box_scale: 8.0,
                sample: 0,
                n_boundary: Some(3),
                n_critical: Some(17),
            },
            CountRecord {
                box_scale: 16.0,
                sample: 1,
                n_boundary: Some(5),
                n_critical: None,
            },
        ];
        let mut buf = Vec::new();
        write_count_csv_to(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "L,sample,n_boundary,n_critical");
        assert_eq!(lines[1], "8,0,3,17");
        assert_eq!(lines[2], "16,1,5,");
        let l_back: f64 = lines[2].split(',').next().unwrap().parse().unwrap();
        assert_eq!(l_back, 16.0);
    }

    #[test]
    fn jsonl_appends_one_parseable_line_per_call() {
        #[derive(Serialize)]
        struct Row {
            config_hash: String,
            value: f64,
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.jsonl");
        for i in 0..3 {
            append_jsonl(
                &path,
                &Row {
                    config_hash: format!("hash{i}"),
                    value: i as f64 * 0.5,
                },
            )
            .unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        for (i, line) in lines.iter().enumerate() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["config_hash"], format!("hash{i}"));
        }
    }
}
