//! Products of band matrices with growing bandwidth.

use num_complex::Complex64;

use crate::matgen::BandMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Intermediate product `M^j`: band storage while the half-width stays at most
/// `n/2` (so offsets are unique mod `n`), dense row-major afterwards.
#[derive(Debug, Clone)]
pub(crate) enum Work {
    Band {
        n: usize,
        half: usize,
        periodic: bool,
        data: Vec<Complex64>,
    },
    Dense {
        n: usize,
        data: Vec<Complex64>,
    },
}

impl Work {
    pub(crate) fn from_matrix(m: &BandMatrix) -> Self {
        let spec = m.spec();
        let n = spec.n();
        let half = spec.half_bandwidth();
        Work::Band {
            n,
            half,
            periodic: spec.topology().is_periodic(),
            data: m.bands().to_vec(),
        }
    }

    fn n(&self) -> usize {
        match self {
            Work::Band { n, .. } | Work::Dense { n, .. } => *n,
        }
    }

    fn column(n: usize, periodic: bool, i: usize, d: isize) -> Option<usize> {
        let j = i as isize + d;
        if periodic {
            Some(j.rem_euclid(n as isize) as usize)
        } else if (0..n as isize).contains(&j) {
            Some(j as usize)
        } else {
            None
        }
    }

    /// Entry `(i, j)`.
    fn get(&self, i: usize, j: usize) -> Complex64 {
        match self {
            Work::Dense { n, data } => data[i * n + j],
            Work::Band {
                n,
                half,
                periodic,
                data,
            } => {
                let (n, h) = (*n as isize, *half as isize);
                let mut d = j as isize - i as isize;
                if *periodic {
                    d = d.rem_euclid(n);
                    if d > h {
                        d -= n;
                    }
                }
                if d.abs() > h {
                    ZERO
                } else {
                    data[i * (2 * *half + 1) + (d + h) as usize]
                }
            }
        }
    }

    /// `self · m`.
    pub(crate) fn mul(&self, m: &BandMatrix) -> Self {
        let spec = m.spec();
        let n = self.n();
        let b = spec.half_bandwidth() as isize;
        let cb = spec.c_n();
        let mb = m.bands();
        match self {
            Work::Band {
                half,
                periodic,
                data,
                ..
            } if (half + spec.half_bandwidth()) <= (n - 1) / 2 => {
                let ha = *half as isize;
                let ca = 2 * *half + 1;
                let hc = ha + b;
                let cc = (2 * hc + 1) as usize;
                let mut out = vec![ZERO; n * cc];
                for i in 0..n {
                    let arow = &data[i * ca..(i + 1) * ca];
                    let crow = &mut out[i * cc..(i + 1) * cc];
                    for (ea, a) in arow.iter().enumerate() {
                        if *a == ZERO {
                            continue;
                        }
                        let e = ea as isize - ha;
                        let Some(k) = Self::column(n, *periodic, i, e) else {
                            continue;
                        };
                        let brow = &mb[k * cb..(k + 1) * cb];
                        let base = (e + hc - b) as usize;
                        for (slot, v) in crow[base..base + cb].iter_mut().zip(brow) {
                            *slot += a * v;
                        }
                    }
                }
                Work::Band {
                    n,
                    half: hc as usize,
                    periodic: *periodic,
                    data: out,
                }
            }
            _ => {
                let mut out = vec![ZERO; n * n];
                for i in 0..n {
                    let crow = &mut out[i * n..(i + 1) * n];
                    for k in 0..n {
                        let a = self.get(i, k);
                        if a == ZERO {
                            continue;
                        }
                        let brow = &mb[k * cb..(k + 1) * cb];
                        for (f, v) in brow.iter().enumerate() {
                            if let Some(j) = spec.column(k, f as isize - b) {
                                crow[j] += a * v;
                            }
                        }
                    }
                }
                Work::Dense { n, data: out }
            }
        }
    }

    /// `tr(self · other)`.
    pub(crate) fn trace_product(&self, other: &Work) -> Complex64 {
        let n = self.n();
        match self {
            Work::Band {
                half,
                periodic,
                data,
                ..
            } => {
                let h = *half as isize;
                let c = 2 * *half + 1;
                let mut acc = ZERO;
                for i in 0..n {
                    for (s, a) in data[i * c..(i + 1) * c].iter().enumerate() {
                        if let Some(k) = Self::column(n, *periodic, i, s as isize - h) {
                            acc += a * other.get(k, i);
                        }
                    }
                }
                acc
            }
            Work::Dense { data, .. } => {
                let mut acc = ZERO;
                for i in 0..n {
                    for k in 0..n {
                        acc += data[i * n + k] * other.get(k, i);
                    }
                }
                acc
            }
        }
    }

    pub(crate) fn trace(&self) -> Complex64 {
        (0..self.n()).map(|i| self.get(i, i)).sum()
    }
}

/// `tr M^l` for `l = 1..=lmax` (entry `l - 1`).
///
/// Computes `P_j = M^j` for `j ≤ ⌈lmax/2⌉` and pairs them:
/// `tr M^{2a} = tr(P_a P_a)`, `tr M^{2a+1} = tr(P_{a+1} P_a)`.
pub(crate) fn trace_powers(m: &BandMatrix, lmax: usize) -> Vec<Complex64> {
    if lmax == 0 {
        return Vec::new();
    }
    let top = lmax.div_ceil(2);
    let mut powers = Vec::with_capacity(top);
    powers.push(Work::from_matrix(m));
    for j in 1..top {
        let next = powers[j - 1].mul(m);
        powers.push(next);
    }
    let mut out = Vec::with_capacity(lmax);
    for l in 1..=lmax {
        let v = if l == 1 {
            powers[0].trace()
        } else if l % 2 == 0 {
            let p = &powers[l / 2 - 1];
            p.trace_product(p)
        } else {
            let a = l / 2;
            powers[a].trace_product(&powers[a - 1])
        };
        out.push(v);
    }
    out
}
