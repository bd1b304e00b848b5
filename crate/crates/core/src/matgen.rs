//! Band-matrix ensembles with a variance profile.
//!
//! Entries are stored row-major by offset: row `i` holds `c_n = 2 b_n + 1` slots
//! for offsets `d = j - i ∈ [-b_n, b_n]`, with `j` taken mod `n` for the periodic
//! topologies. Slots whose column falls off the matrix in the non-periodic
//! topology are structurally absent and hold zero.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::PeriodizedProfile;

/// Default ceiling on `n` for operations that materialize a dense matrix.
pub const DEFAULT_DENSE_LIMIT: usize = 4096;

/// Which of the three ensembles a matrix belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// Periodic band, `c_n/n → ν ∈ (0, 1]`.
    PeriodicNu,
    /// Periodic band, `c_n = o(n)`; corner entries carry the wrapped profile terms.
    PeriodicZero,
    /// Non-periodic band, `c_n = o(n)`.
    NonperiodicZero,
}

impl Topology {
    pub fn is_periodic(self) -> bool {
        !matches!(self, Topology::NonperiodicZero)
    }

    fn code(self) -> u8 {
        match self {
            Topology::PeriodicNu => 0,
            Topology::PeriodicZero => 1,
            Topology::NonperiodicZero => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Topology::PeriodicNu),
            1 => Some(Topology::PeriodicZero),
            2 => Some(Topology::NonperiodicZero),
            _ => None,
        }
    }
}

/// Geometry and profile of a band ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    n: usize,
    half_bandwidth: usize,
    topology: Topology,
    profile: PeriodizedProfile,
}

impl BandSpec {
    pub fn new(
        n: usize,
        half_bandwidth: usize,
        topology: Topology,
        profile: PeriodizedProfile,
    ) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidSpec(format!("n = {n} must be at least 4")));
        }
        let c = 2 * half_bandwidth + 1;
        if c > n {
            return Err(Error::InvalidSpec(format!(
                "c_n = 2 b_n + 1 = {c} exceeds n = {n}"
            )));
        }
        match topology {
            Topology::PeriodicNu if !profile.is_periodic() => {
                return Err(Error::InvalidSpec(
                    "periodic-nu topology needs a profile with nu > 0".into(),
                ))
            }
            Topology::PeriodicZero | Topology::NonperiodicZero if profile.is_periodic() => {
                return Err(Error::InvalidSpec(format!(
                    "{topology:?} needs the non-periodized profile (nu = 0), got nu = {}; \
                     non-periodic bands with nu > 0 have no limiting variance",
                    profile.nu()
                )))
            }
            _ => {}
        }
        Ok(Self {
            n,
            half_bandwidth,
            topology,
            profile,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `b_n`.
    pub fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }

    /// `c_n = 2 b_n + 1`.
    pub fn c_n(&self) -> usize {
        2 * self.half_bandwidth + 1
    }

    /// Declared band fraction; only used to pick the matching limit.
    pub fn nu(&self) -> f64 {
        self.profile.nu()
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn profile(&self) -> &PeriodizedProfile {
        &self.profile
    }

    /// Column of slot `offset` in row `i`, or `None` when structurally absent.
    pub fn column(&self, i: usize, offset: isize) -> Option<usize> {
        let j = i as isize + offset;
        if self.topology.is_periodic() {
            Some(j.rem_euclid(self.n as isize) as usize)
        } else if (0..self.n as isize).contains(&j) {
            Some(j as usize)
        } else {
            None
        }
    }

    /// Offset `j - i` of `(i, j)` if it lies in the band.
    pub fn offset(&self, i: usize, j: usize) -> Option<isize> {
        let b = self.half_bandwidth as isize;
        let mut d = j as isize - i as isize;
        if self.topology.is_periodic() {
            let n = self.n as isize;
            d = d.rem_euclid(n);
            if d > n / 2 {
                d -= n;
            }
            // n even, d = n/2 is also reachable as -n/2.
            if d.abs() > b && (n - d.abs()) <= b {
                d = if d > 0 { d - n } else { d + n };
            }
        }
        (d.abs() <= b).then_some(d)
    }

    /// Row indices of column `j` inside the band (0-based).
    pub fn band_index_set(&self, j: usize) -> Result<BTreeSet<usize>> {
        if j >= self.n {
            return Err(Error::IndexOutOfRange { index: j, n: self.n });
        }
        let b = self.half_bandwidth as isize;
        Ok((-b..=b)
            .filter_map(|d| self.column(j, d))
            .collect())
    }

    /// Standard deviation factor of entry `(i, j)`: `m_ij = amplitude · x_ij`.
    pub fn amplitude(&self, i: usize, j: usize) -> f64 {
        let Some(d) = self.offset(i, j) else {
            return 0.0;
        };
        let c = self.c_n() as f64;
        let w = self.profile.base();
        match self.topology {
            // The wrapped offset realizes the exact finite-n period n/c_n.
            Topology::PeriodicNu => (w.value(-d as f64 / c) / c).sqrt(),
            Topology::NonperiodicZero => (w.value((i as f64 - j as f64) / c) / c).sqrt(),
            Topology::PeriodicZero => {
                let raw = i as f64 - j as f64;
                let n = self.n as f64;
                [raw, raw + n, raw - n]
                    .iter()
                    .map(|x| w.value(x / c).sqrt())
                    .sum::<f64>()
                    / c.sqrt()
            }
        }
    }
}

/// Distribution of the raw entries `x_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryLaw {
    /// `(g₁ + i g₂)/√2` with independent standard normals.
    #[default]
    ComplexGaussian,
}

impl EntryLaw {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Complex64 {
        match self {
            EntryLaw::ComplexGaussian => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            }
        }
    }

    /// `E[x²]`.
    pub fn pseudo_second_moment(self) -> Complex64 {
        match self {
            EntryLaw::ComplexGaussian => Complex64::new(0.0, 0.0),
        }
    }
}

/// Identifies one sampled matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleId {
    pub seed: u64,
    pub replicate: u64,
}

/// A matrix in band storage.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    spec: BandSpec,
    data: Vec<Complex64>,
    origin: Option<SampleId>,
}

impl BandMatrix {
    pub fn zeros(spec: BandSpec) -> Self {
        let len = spec.n() * spec.c_n();
        Self {
            spec,
            data: vec![Complex64::new(0.0, 0.0); len],
            origin: None,
        }
    }

    /// Fills every in-band position `(i, j)` with `f(i, j)`.
    pub fn from_fn(spec: BandSpec, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(spec);
        let b = m.spec.half_bandwidth() as isize;
        let c = m.spec.c_n();
        for i in 0..m.spec.n() {
            for d in -b..=b {
                if let Some(j) = m.spec.column(i, d) {
                    m.data[i * c + (d + b) as usize] = f(i, j);
                }
            }
        }
        m
    }

    pub fn spec(&self) -> &BandSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn origin(&self) -> Option<SampleId> {
        self.origin
    }

    /// Raw band storage (`n × c_n`, row-major by offset).
    pub fn bands(&self) -> &[Complex64] {
        &self.data
    }

    /// Slots of row `i`, offsets `-b_n..=b_n`.
    pub fn row(&self, i: usize) -> &[Complex64] {
        let c = self.spec.c_n();
        &self.data[i * c..(i + 1) * c]
    }

    /// Entry `m_ij` (zero off the band).
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match self.spec.offset(i, j) {
            Some(d) => self.row(i)[(d + self.spec.half_bandwidth() as isize) as usize],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Number of structurally present entries in row `i`.
    pub fn stored_in_row(&self, i: usize) -> usize {
        let b = self.spec.half_bandwidth() as isize;
        (-b..=b).filter(|&d| self.spec.column(i, d).is_some()).count()
    }

    /// Materializes the matrix, refusing when `n > dense_limit`.
    pub fn to_dense(&self, dense_limit: usize) -> Result<DMatrix<Complex64>> {
        let n = self.n();
        if n > dense_limit {
            return Err(Error::DenseLimit { n, limit: dense_limit });
        }
        let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        let b = self.spec.half_bandwidth() as isize;
        for i in 0..n {
            for (slot, v) in self.row(i).iter().enumerate() {
                if let Some(j) = self.spec.column(i, slot as isize - b) {
                    out[(i, j)] = *v;
                }
            }
        }
        Ok(out)
    }

    /// Same spec, entries relabeled by `i -> i + shift (mod n)`.
    pub fn cyclic_shift(&self, shift: usize) -> Self {
        let n = self.n();
        BandMatrix::from_fn(self.spec.clone(), |i, j| {
            self.get((i + n - shift % n) % n, (j + n - shift % n) % n)
        })
    }
}

/// Draws one matrix from the ensemble.
///
/// Randomness is keyed by `(seed, replicate, row)`: ChaCha20 seeded from `seed`,
/// stream `replicate`, and a fixed word offset per row, so any replicate or row
/// can be regenerated independently of the others.
pub fn sample(spec: &BandSpec, law: EntryLaw, seed: u64, replicate: u64) -> BandMatrix {
    let mut base = ChaCha20Rng::seed_from_u64(seed);
    base.set_stream(replicate);
    let b = spec.half_bandwidth() as isize;
    let c = spec.c_n();
    let n = spec.n() as isize;
    // Rows whose band does not wrap share the amplitudes of row b; under
    // periodic-nu the amplitude depends on the wrapped offset alone.
    let interior: Vec<f64> = (-b..=b)
        .map(|d| spec.amplitude(b as usize, (b + d) as usize))
        .collect();
    let mut edge = vec![0.0; c];
    let mut m = BandMatrix::zeros(spec.clone());
    for i in 0..spec.n() {
        let shared = spec.topology == Topology::PeriodicNu || (i as isize >= b && i as isize + b < n);
        let amplitudes = if shared {
            &interior
        } else {
            for (s, a) in edge.iter_mut().enumerate() {
                *a = spec
                    .column(i, s as isize - b)
                    .map_or(0.0, |j| spec.amplitude(i, j));
            }
            &edge
        };
        let mut rng = base.clone();
        rng.set_word_pos((i as u128) << 32);
        let row = &mut m.data[i * c..(i + 1) * c];
        for (slot, amp) in row.iter_mut().zip(amplitudes) {
            let x = law.draw(&mut rng);
            *slot = x * *amp;
        }
    }
    m.origin = Some(SampleId { seed, replicate });
    m
}

const DUMP_MAGIC: &[u8; 16] = b"bandmat v1\0\0\0\0\0\0";

/// Writes the `bandmat v1` binary dump plus a JSON sidecar (`<path>.json`).
///
/// Layout, all little-endian: 16-byte magic, `u64 n`, `u64 b_n`, `u8 topology`
/// (0 periodic-nu, 1 periodic-zero, 2 nonperiodic-zero) and 7 zero bytes,
/// `u64 seed`, `u64 replicate`, then `n·c_n` complex entries as `(f64 re, f64 im)`
/// in band-storage order.
pub fn write_dump(path: &Path, m: &BandMatrix) -> Result<()> {
    let id = m.origin.unwrap_or(SampleId { seed: 0, replicate: 0 });
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&(m.n() as u64).to_le_bytes())?;
    out.write_all(&(m.spec.half_bandwidth() as u64).to_le_bytes())?;
    out.write_all(&[m.spec.topology().code(), 0, 0, 0, 0, 0, 0, 0])?;
    out.write_all(&id.seed.to_le_bytes())?;
    out.write_all(&id.replicate.to_le_bytes())?;
    for v in &m.data {
        out.write_all(&v.re.to_le_bytes())?;
        out.write_all(&v.im.to_le_bytes())?;
    }
    out.flush()?;
    let sidecar = serde_json::json!({
        "format": "bandmat v1",
        "spec": m.spec,
        "seed": id.seed,
        "replicate": id.replicate,
        "c_n": m.spec.c_n(),
        "entry_layout": "row-major n x c_n, offset j-i from -b_n to b_n, (f64 re, f64 im) little-endian",
    });
    std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Reads a dump written by [`write_dump`], taking the spec from the sidecar.
pub fn read_dump(path: &Path) -> Result<BandMatrix> {
    let side: serde_json::Value = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    let spec: BandSpec = serde_json::from_value(side["spec"].clone())?;
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 16];
    input.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Format("bad bandmat magic".into()));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |input: &mut BufReader<File>| -> Result<u64> {
        input.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let n = next_u64(&mut input)? as usize;
    let b = next_u64(&mut input)? as usize;
    let topo = next_u64(&mut input)?.to_le_bytes()[0];
    let seed = next_u64(&mut input)?;
    let replicate = next_u64(&mut input)?;
    if n != spec.n()
        || b != spec.half_bandwidth()
        || Topology::from_code(topo) != Some(spec.topology())
    {
        return Err(Error::Format("dump header disagrees with sidecar spec".into()));
    }
    let mut m = BandMatrix::zeros(spec);
    for v in m.data.iter_mut() {
        let re = f64::from_le_bytes({
            input.read_exact(&mut word)?;
            word
        });
        let im = f64::from_le_bytes({
            input.read_exact(&mut word)?;
            word
        });
        *v = Complex64::new(re, im);
    }
    m.origin = Some(SampleId { seed, replicate });
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::VarianceProfile;

    fn spec(n: usize, b: usize, topology: Topology) -> BandSpec {
        let nu = if topology == Topology::PeriodicNu { 0.5 } else { 0.0 };
        let p = PeriodizedProfile::new(VarianceProfile::uniform(), nu).unwrap();
        BandSpec::new(n, b, topology, p).unwrap()
    }

    #[test]
    fn rejects_invalid_specs() {
        let zero = PeriodizedProfile::non_periodic(VarianceProfile::uniform());
        let half = PeriodizedProfile::new(VarianceProfile::uniform(), 0.5).unwrap();
        assert!(BandSpec::new(3, 0, Topology::PeriodicZero, zero.clone()).is_err());
        assert!(BandSpec::new(8, 4, Topology::PeriodicZero, zero.clone()).is_err());
        assert!(BandSpec::new(8, 2, Topology::PeriodicNu, zero).is_err());
        assert!(BandSpec::new(8, 2, Topology::NonperiodicZero, half.clone()).is_err());
        assert!(BandSpec::new(8, 2, Topology::PeriodicZero, half).is_err());
    }

    #[test]
    fn row_entry_counts() {
        let m = sample(&spec(8, 2, Topology::PeriodicNu), EntryLaw::ComplexGaussian, 1, 0);
        for i in 0..8 {
            assert_eq!(m.stored_in_row(i), 5);
            assert!(m.row(i).iter().all(|v| v.norm() > 0.0));
        }
        let m = sample(&spec(8, 2, Topology::NonperiodicZero), EntryLaw::ComplexGaussian, 1, 0);
        assert_eq!(m.stored_in_row(0), 3);
        // offsets -2, -1 are absent in row 0
        assert_eq!(m.row(0)[0], Complex64::new(0.0, 0.0));
        assert_eq!(m.row(0)[1], Complex64::new(0.0, 0.0));
        assert!(m.row(0)[2..].iter().all(|v| v.norm() > 0.0));
    }

    #[test]
    fn band_index_sets() {
        let p = spec(8, 2, Topology::PeriodicZero);
        // 1-based {7, 8, 1, 2, 3}
        assert_eq!(
            p.band_index_set(0).unwrap().into_iter().collect::<Vec<_>>(),
            vec![0, 1, 2, 6, 7]
        );
        for j in 0..8 {
            assert_eq!(p.band_index_set(j).unwrap().len(), 5);
        }
        let np = spec(8, 2, Topology::NonperiodicZero);
        assert_eq!(
            np.band_index_set(0).unwrap().into_iter().collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert!(p.band_index_set(8).is_err());
    }

    #[test]
    fn offsets_roundtrip_with_columns() {
        for topo in [Topology::PeriodicNu, Topology::PeriodicZero, Topology::NonperiodicZero] {
            for (n, b) in [(8, 2), (9, 4), (10, 4), (6, 0)] {
                let s = spec(n, b, topo);
                for i in 0..n {
                    for d in -(b as isize)..=b as isize {
                        if let Some(j) = s.column(i, d) {
                            assert_eq!(s.offset(i, j), Some(d), "{topo:?} n={n} b={b} i={i} d={d}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn periodic_zero_corner_amplitude_is_three_term_sum() {
        let s = spec(10, 2, Topology::PeriodicZero);
        let c = 5.0_f64;
        // (0, 9): raw i - j = -9, wrapped term at -9 + 10 = 1.
        let expect = (1.0 / c).sqrt();
        assert!((s.amplitude(0, 9) - expect).abs() < 1e-15);
        assert_eq!(s.amplitude(0, 5), 0.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = spec(16, 3, Topology::PeriodicZero);
        let a = sample(&s, EntryLaw::ComplexGaussian, 42, 3);
        let b = sample(&s, EntryLaw::ComplexGaussian, 42, 3);
        assert_eq!(a.bands(), b.bands());
        let c = sample(&s, EntryLaw::ComplexGaussian, 42, 4);
        assert_ne!(a.bands(), c.bands());
    }

    #[test]
    fn dense_roundtrip() {
        let s = spec(8, 2, Topology::NonperiodicZero);
        let z = BandMatrix::zeros(s.clone());
        assert!(z.to_dense(64).unwrap().iter().all(|v| v.norm() == 0.0));
        let m = sample(&s, EntryLaw::ComplexGaussian, 5, 0);
        let d = m.to_dense(64).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(d[(i, j)], m.get(i, j));
                if s.offset(i, j).is_none() {
                    assert_eq!(d[(i, j)], Complex64::new(0.0, 0.0));
                }
            }
        }
        assert!(matches!(m.to_dense(4), Err(Error::DenseLimit { .. })));
    }

    #[test]
    fn dump_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bandmat");
        let m = sample(&spec(12, 3, Topology::PeriodicNu), EntryLaw::ComplexGaussian, 9, 2);
        write_dump(&path, &m).unwrap();
        let back = read_dump(&path).unwrap();
        assert_eq!(back, m);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 16 + 5 * 8 + 12 * 7 * 16);
    }
}
