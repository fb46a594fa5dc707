//! Binary snapshot of a solved store.
//!
//! Layout (little endian): magic, format version, `n_steps`, `dt`, `m_bar`,
//! `n_bar`, spin-class hash, the observable, then for every section a record
//! count followed by the packed values. Key order is implied by the grid and
//! truncation, so keys are not written.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::algebra::{SpinClass, SpinOperator, C64};
use crate::error::{Error, Result};
use crate::multiset;

use super::store::{OneSidedStore, StraddlingLevel, StraddlingStore};
use super::{PropagatorStore, SolveOptions};

const MAGIC: &[u8; 8] = b"SPCHAIN\x01";
const VERSION: u32 = 1;

fn spin_hash(spin: &SpinClass) -> u64 {
    // FNV-1a over the defining parameters
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in [spin.epsilon, spin.delta, spin.coupling, spin.dt()] {
        for b in x.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn put_values<W: Write>(out: &mut W, values: &[SpinOperator]) -> std::io::Result<()> {
    out.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        for c in &v.0 {
            out.write_all(&c.re.to_le_bytes())?;
            out.write_all(&c.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_checkpoint(store: &PropagatorStore, path: &Path) -> Result<()> {
    let err = io_err(path);
    let mut out = BufWriter::new(File::create(path).map_err(&err)?);
    let one = &store.one;
    let mut header = Vec::new();
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&(one.contour.n_steps() as u64).to_le_bytes());
    header.extend_from_slice(&store.spin.dt().to_le_bytes());
    header.extend_from_slice(&(store.m_bar as u64).to_le_bytes());
    header.extend_from_slice(&(one.n_bar as u64).to_le_bytes());
    header.extend_from_slice(&spin_hash(&store.spin).to_le_bytes());
    out.write_all(&header).map_err(&err)?;
    put_values(&mut out, &[*store.observable()]).map_err(&err)?;
    for level in one.negative.iter().chain(&one.positive) {
        put_values(&mut out, &level.values).map_err(&err)?;
    }
    for level in &store.strad.levels {
        put_values(&mut out, &level.values).map_err(&err)?;
    }
    out.flush().map_err(&err)
}

struct Input<R> {
    inner: R,
}

impl<R: Read> Input<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
        Ok(buf)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn values(&mut self, expected: usize) -> Result<Vec<SpinOperator>> {
        let count = self.u64()? as usize;
        if count != expected {
            return Err(Error::Checkpoint(format!(
                "section holds {count} records, expected {expected}"
            )));
        }
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let mut m = [C64::new(0.0, 0.0); 4];
            for c in &mut m {
                *c = C64::new(self.f64()?, self.f64()?);
            }
            values.push(SpinOperator(m));
        }
        Ok(values)
    }
}

/// Loads a snapshot written for the same spin class and truncation.
pub fn read_checkpoint(path: &Path, spin: &SpinClass, options: SolveOptions) -> Result<PropagatorStore> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut input = Input {
        inner: BufReader::new(file),
    };
    if &input.bytes::<8>()? != MAGIC {
        return Err(Error::Checkpoint("not a propagator checkpoint".into()));
    }
    let version = u32::from_le_bytes(input.bytes()?);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_steps = input.u64()? as usize;
    let dt = input.f64()?;
    let m_bar = input.u64()? as usize;
    let n_bar = input.u64()? as usize;
    let hash = input.u64()?;
    if n_steps != spin.n_steps()
        || dt != spin.dt()
        || m_bar != options.m_bar
        || n_bar != options.n_bar
        || hash != spin_hash(spin)
    {
        return Err(Error::Checkpoint(
            "header does not match the requested grid, truncation or spin class".into(),
        ));
    }
    let observable = input.values(1)?[0];
    let contour = crate::contour::Contour::new(n_steps);
    let mut one = OneSidedStore::new(contour, n_bar);
    for level in one.negative.iter_mut().chain(one.positive.iter_mut()) {
        level.values = input.values(level.len())?;
        level.filled.fill(true);
    }
    let mut levels = Vec::with_capacity(n_bar + 1);
    for crosses in 0..=n_bar {
        let all = if crosses == 0 {
            Vec::new()
        } else {
            multiset::enumerate(contour.len(), crosses)
        };
        let mut level = StraddlingLevel::new(contour, crosses, &all);
        level.values = input.values(level.len())?;
        level.filled.fill(true);
        levels.push(level);
    }
    Ok(PropagatorStore {
        spin: spin.clone(),
        one: Arc::new(one),
        strad: StraddlingStore {
            contour,
            observable,
            levels,
        },
        m_bar,
    })
}
