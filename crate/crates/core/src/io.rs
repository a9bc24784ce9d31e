//! File formats.
//!
//! Text outputs are CSV with a header line; every float is written with 17
//! significant digits so that values round-trip exactly.
//!
//! Binary containers are little-endian throughout and start with an 8-byte
//! magic string:
//!
//! | magic      | header                                                        | payload                         |
//! |------------|---------------------------------------------------------------|---------------------------------|
//! | `QNUPROP1` | `u64 rows, u64 cols, f64 period, u64 slices, f64 q_min, f64 q_max, u64 n_points, f64 hbar` | row-major `(re, im)` `f64` pairs |
//! | `QNQSPEC1` | `u64 count, f64 Omega, f64 hbar`                              | `count` quasienergies (`f64`)   |
//! | `QNPSF001` | `u64 nq, u64 np, f64 q_min, f64 q_max, f64 p_min, f64 p_max, f64 time, u64 kind` | row-major values, `values[iq * np + ip]` |
//!
//! Field axes are cell centres of a regular raster of the stored window;
//! `kind` is 0 for the Wigner diagonal and 1 for the Liouville diagonal.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;

use crate::error::{Error, Result};
use crate::floquet::{Grid, QuasiSpectrum, UnitaryPropagator};
use crate::phase_space::{FieldKind, PhaseSpaceField, PhaseWindow};
use crate::c64;

pub const PROPAGATOR_MAGIC: &[u8; 8] = b"QNUPROP1";
pub const SPECTRUM_MAGIC: &[u8; 8] = b"QNQSPEC1";
pub const FIELD_MAGIC: &[u8; 8] = b"QNPSF001";

/// 17 significant digits, shortest exponent form.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `header` then one comma-separated row per entry of `rows`.
pub fn write_csv<P: AsRef<Path>>(path: P, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`]; returns the header and the rows.
pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = match lines.next() {
        Some(h) => h?.split(',').map(str::to_owned).collect::<Vec<_>>(),
        None => return Err(Error::Format("empty CSV".into())),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Format(format!(
                "line {}: {} columns, header has {}",
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// One quasienergy per line, no header.
pub fn write_quasienergies_csv<P: AsRef<Path>>(path: P, spec: &QuasiSpectrum) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &e in &spec.energies {
        writeln!(w, "{}", fmt_f64(e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_quasienergies_csv<P: AsRef<Path>>(path: P, drive_frequency: f64, hbar: f64) -> Result<QuasiSpectrum> {
    let mut energies = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        energies.push(
            line.trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?,
        );
    }
    QuasiSpectrum::new(energies, drive_frequency, hbar)
}

/// (q, p, value) rows in storage order.
pub fn write_field_csv<P: AsRef<Path>>(path: P, field: &PhaseSpaceField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "q,p,value")?;
    for (iq, &q) in field.q_axis.iter().enumerate() {
        for (ip, &p) in field.p_axis.iter().enumerate() {
            writeln!(
                w,
                "{},{},{}",
                fmt_f64(q),
                fmt_f64(p),
                fmt_f64(field.get(iq, ip))
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u64(&mut self, v: u64) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn magic(&mut self, expected: &[u8; 8]) -> Result<()> {
        let mut m = [0u8; 8];
        self.0.read_exact(&mut m)?;
        if &m != expected {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&m),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }
    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn usize(&mut self, what: &str) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit")))
    }
    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; n * 8];
        self.0.read_exact(&mut bytes)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn end(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.0.read(&mut b)? {
            0 => Ok(()),
            _ => Err(Error::Format("trailing bytes".into())),
        }
    }
}

pub fn write_propagator<W: Write>(out: W, u: &UnitaryPropagator) -> Result<()> {
    let mut w = Writer(BufWriter::new(out));
    w.0.write_all(PROPAGATOR_MAGIC)?;
    let (rows, cols) = (u.matrix.nrows(), u.matrix.ncols());
    w.u64(rows as u64)?;
    w.u64(cols as u64)?;
    w.f64(u.period)?;
    w.u64(u.slices as u64)?;
    w.f64(u.grid.q_min)?;
    w.f64(u.grid.q_max)?;
    w.u64(u.grid.n_points as u64)?;
    w.f64(u.grid.hbar)?;
    for i in 0..rows {
        for j in 0..cols {
            let z = u.matrix[(i, j)];
            w.f64(z.re)?;
            w.f64(z.im)?;
        }
    }
    w.0.flush()?;
    Ok(())
}

pub fn read_propagator<R: Read>(input: R) -> Result<UnitaryPropagator> {
    let mut r = Reader(BufReader::new(input));
    r.magic(PROPAGATOR_MAGIC)?;
    let rows = r.usize("rows")?;
    let cols = r.usize("cols")?;
    let period = r.f64()?;
    let slices = r.usize("slices")?;
    let (q_min, q_max) = (r.f64()?, r.f64()?);
    let n_points = r.usize("n_points")?;
    let hbar = r.f64()?;
    if rows != cols || rows != n_points {
        return Err(Error::Format(format!(
            "matrix {rows}x{cols} does not match a grid of {n_points} points"
        )));
    }
    let grid = Grid::new(q_min, q_max, n_points, hbar)?;
    let data = r.f64s(2 * rows * cols)?;
    r.end()?;
    let matrix = Mat::from_fn(rows, cols, |i, j| {
        let k = 2 * (i * cols + j);
        c64::new(data[k], data[k + 1])
    });
    Ok(UnitaryPropagator {
        matrix,
        period,
        slices,
        grid,
    })
}

pub fn write_spectrum<W: Write>(out: W, spec: &QuasiSpectrum) -> Result<()> {
    let mut w = Writer(BufWriter::new(out));
    w.0.write_all(SPECTRUM_MAGIC)?;
    w.u64(spec.energies.len() as u64)?;
    w.f64(spec.drive_frequency)?;
    w.f64(spec.hbar)?;
    for &e in &spec.energies {
        w.f64(e)?;
    }
    w.0.flush()?;
    Ok(())
}

pub fn read_spectrum<R: Read>(input: R) -> Result<QuasiSpectrum> {
    let mut r = Reader(BufReader::new(input));
    r.magic(SPECTRUM_MAGIC)?;
    let count = r.usize("count")?;
    let omega = r.f64()?;
    let hbar = r.f64()?;
    let energies = r.f64s(count)?;
    r.end()?;
    QuasiSpectrum::new(energies, omega, hbar)
}

pub fn write_field<W: Write>(out: W, field: &PhaseSpaceField) -> Result<()> {
    field.validate()?;
    let mut w = Writer(BufWriter::new(out));
    w.0.write_all(FIELD_MAGIC)?;
    let win = field.window();
    w.u64(field.nq() as u64)?;
    w.u64(field.np() as u64)?;
    w.f64(win.q_min)?;
    w.f64(win.q_max)?;
    w.f64(win.p_min)?;
    w.f64(win.p_max)?;
    w.f64(field.time)?;
    w.u64(field.kind.code() as u64)?;
    for &v in &field.values {
        w.f64(v)?;
    }
    w.0.flush()?;
    Ok(())
}

/// Axes are rebuilt from the stored window, so they may differ from the
/// written ones in the last bit.
pub fn read_field<R: Read>(input: R) -> Result<PhaseSpaceField> {
    let mut r = Reader(BufReader::new(input));
    r.magic(FIELD_MAGIC)?;
    let nq = r.usize("nq")?;
    let np = r.usize("np")?;
    let window = PhaseWindow::new(r.f64()?, r.f64()?, r.f64()?, r.f64()?)?;
    let time = r.f64()?;
    let code = r.u64()?;
    let kind = u8::try_from(code)
        .ok()
        .and_then(FieldKind::from_code)
        .ok_or_else(|| Error::Format(format!("unknown field kind {code}")))?;
    let mut field = PhaseSpaceField::zeros(&window, (nq, np), time, kind)?;
    field.values = r.f64s(nq * np)?;
    r.end()?;
    field.validate()?;
    Ok(field)
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn save<P, F>(path: P, write: F) -> Result<()>
where
    P: AsRef<Path>,
    F: FnOnce(File) -> Result<()>,
{
    let path = path.as_ref();
    let tmp = path.with_extension("partial");
    write(File::create(&tmp)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<P: AsRef<Path>, T: serde::Serialize>(path: P, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{build_grid, propagate_period};
    use crate::model::HarmonicOscillator;

    #[test]
    fn floats_round_trip_through_text() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, f64::MIN_POSITIVE, 1.0 - f64::EPSILON] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn propagator_round_trip_is_exact() {
        let h = HarmonicOscillator::new(1.0, 1.0, 1.0);
        let g = build_grid(&h, 10.0, 32).unwrap();
        let u = propagate_period(&h, &g, 256).unwrap();
        let mut buf = Vec::new();
        write_propagator(&mut buf, &u).unwrap();
        assert_eq!(buf.len(), 8 + 8 * 8 + 16 * 32 * 32);
        let v = read_propagator(&buf[..]).unwrap();
        assert_eq!(v.matrix, u.matrix);
        assert_eq!(v.grid, u.grid);
        assert_eq!((v.period, v.slices), (u.period, u.slices));
        buf[3] = b'X';
        assert!(matches!(read_propagator(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn spectrum_and_field_round_trip() {
        let s = QuasiSpectrum::new(vec![-0.4, 0.01, 0.3], 0.95, 1.0).unwrap();
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &s).unwrap();
        assert_eq!(read_spectrum(&buf[..]).unwrap(), s);
        buf.push(0);
        assert!(read_spectrum(&buf[..]).is_err());

        let w = PhaseWindow::new(-1.0, 2.0, -3.0, 3.0).unwrap();
        let mut f = PhaseSpaceField::zeros(&w, (3, 4), 2.5, FieldKind::LiouvilleDiagonal).unwrap();
        f.values = (0..12).map(|i| i as f64 * 0.7 - 1.0).collect();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let g = read_field(&buf[..]).unwrap();
        assert_eq!(g.values, f.values);
        assert_eq!(g.kind, f.kind);
        for (a, b) in g.q_axis.iter().zip(&f.q_axis).chain(g.p_axis.iter().zip(&f.p_axis)) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let rows = vec![vec![1.0, 0.1], vec![2.0, 1e-300]];
        write_csv(&path, &["k", "P_k"], &rows).unwrap();
        let (h, r) = read_csv(&path).unwrap();
        assert_eq!(h, vec!["k", "P_k"]);
        assert_eq!(r, rows);

        let s = QuasiSpectrum::new(vec![0.2, -0.1], 0.95, 1.0).unwrap();
        let qpath = dir.path().join("q.csv");
        write_quasienergies_csv(&qpath, &s).unwrap();
        assert_eq!(read_quasienergies_csv(&qpath, 0.95, 1.0).unwrap(), s);
    }
}
