//! Binary checkpoint files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "SQGCHK1"                 7 bytes
//! N                         u64
//! L, nu, t                  f64 x 3
//! c[i1][i2] (re, im)        f64 pairs, i1 in 0..N, i2 in 0..=N/2, row-major
//! ```
//!
//! The stored half spectrum uses the same normalization as [`SpectralField`];
//! the other half follows from Hermitian symmetry.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{Grid, SpectralField};

pub const MAGIC: &[u8; 7] = b"SQGCHK1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub n: usize,
    pub length: f64,
    pub nu: f64,
    pub time: f64,
    pub half_spectrum: Vec<Complex<f64>>,
}

impl Checkpoint {
    pub fn from_field<T: Real>(field: &SpectralField<T>, nu: T, time: T) -> Self {
        let n = field.domain().n();
        let h = n / 2 + 1;
        let mut half_spectrum = Vec::with_capacity(n * h);
        for i1 in 0..n {
            for i2 in 0..h {
                let c = field.coeffs()[i1 * n + i2];
                half_spectrum.push(Complex::new(c.re.as_f64(), c.im.as_f64()));
            }
        }
        Self {
            n,
            length: field.domain().length().as_f64(),
            nu: nu.as_f64(),
            time: time.as_f64(),
            half_spectrum,
        }
    }

    /// Rebuilds the full spectrum on `grid`, which must match `N` and `L`.
    pub fn to_field<T: Real>(&self, grid: &Arc<Grid<T>>) -> Result<SpectralField<T>> {
        let n = self.n;
        let gl = grid.domain().length().as_f64();
        if grid.n() != n || (gl - self.length).abs() > 1e-12 * self.length.abs() {
            return Err(Error::DomainMismatch(format!(
                "checkpoint has N = {n}, L = {}; grid has {}",
                self.length,
                grid.domain()
            )));
        }
        let h = n / 2 + 1;
        let conv = |c: Complex<f64>| Complex::new(T::lit(c.re), T::lit(c.im));
        let mut coeffs = Vec::with_capacity(n * n);
        for i1 in 0..n {
            for i2 in 0..n {
                let c = if i2 < h {
                    self.half_spectrum[i1 * h + i2]
                } else {
                    self.half_spectrum[((n - i1) % n) * h + (n - i2)].conj()
                };
                coeffs.push(conv(c));
            }
        }
        SpectralField::from_coeffs(grid, coeffs)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for x in [self.length, self.nu, self.time] {
            w.write_all(&x.to_le_bytes())?;
        }
        for c in &self.half_spectrum {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 7];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", String::from_utf8_lossy(&magic))));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        if n < 2 || n % 2 != 0 || n > 1 << 16 {
            return Err(Error::Format(format!("implausible grid size {n}")));
        }
        let mut f64s = |r: &mut dyn Read| -> Result<f64> {
            r.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        let length = f64s(&mut r)?;
        let nu = f64s(&mut r)?;
        let time = f64s(&mut r)?;
        let count = n * (n / 2 + 1);
        let mut half_spectrum = Vec::with_capacity(count);
        for _ in 0..count {
            let re = f64s(&mut r)?;
            let im = f64s(&mut r)?;
            half_spectrum.push(Complex::new(re, im));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after spectrum".into()));
        }
        Ok(Self {
            n,
            length,
            nu,
            time,
            half_spectrum,
        })
    }
}

pub fn write(path: impl AsRef<Path>, chk: &Checkpoint) -> Result<()> {
    chk.write_to(BufWriter::new(File::create(path)?))
}

pub fn read(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::read_from(BufReader::new(File::open(path)?))
}
