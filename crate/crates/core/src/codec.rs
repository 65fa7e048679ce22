//! Inner sparse-regression layer: one-hot indexing of LDPC symbols, the
//! Gaussian design matrix, the AWGN channel and SNR bookkeeping.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gf::FieldElem;
use crate::rng::{self, Stream};

/// A length-`qL` real vector split into `L` sections of `q` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseState {
    q: usize,
    data: Vec<f64>,
}

impl SparseState {
    pub fn zeros(q: usize, sections: usize) -> Self {
        Self {
            q,
            data: vec![0.0; q * sections],
        }
    }

    pub fn from_vec(q: usize, data: Vec<f64>) -> Result<Self> {
        if q == 0 || !data.len().is_multiple_of(q) {
            return Err(Error::Dimension {
                expected: q,
                got: data.len(),
            });
        }
        Ok(Self { q, data })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn num_sections(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn section(&self, l: usize) -> &[f64] {
        &self.data[l * self.q..(l + 1) * self.q]
    }

    pub fn section_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.data[l * self.q..(l + 1) * self.q]
    }

    pub fn sections(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.q)
    }
}

/// Map symbol `v_ℓ` to the standard basis vector `e_{v_ℓ}` in section `ℓ`.
pub fn index_codeword(v: &[FieldElem], q: usize) -> Result<SparseState> {
    let mut s = SparseState::zeros(q, v.len());
    for (l, &sym) in v.iter().enumerate() {
        if sym as usize >= q {
            return Err(Error::Domain(format!("symbol {sym} not below q = {q}")));
        }
        s.section_mut(l)[sym as usize] = 1.0;
    }
    Ok(s)
}

/// Per-section argmax; ties go to the lowest index.
pub fn hard_decision(s: &SparseState) -> Vec<FieldElem> {
    s.sections()
        .map(|sec| {
            let mut best = 0;
            for (g, &x) in sec.iter().enumerate() {
                if x > sec[best] {
                    best = g;
                }
            }
            best as FieldElem
        })
        .collect()
}

/// How the entries of `A` are held in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixMode {
    /// Materialized column-major `f32` storage.
    Dense,
    /// Columns regenerated from `(seed, column)` on every product.
    Regenerate,
}

/// `n × qL` matrix with i.i.d. `N(0, 1/n)` entries, determined by its seed.
///
/// Column `j` is drawn from its own random stream, so both storage modes
/// produce identical entries and identical products.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    seed: u64,
    dense: Option<Vec<f32>>,
}

impl DesignMatrix {
    pub fn new(rows: usize, cols: usize, seed: u64) -> Self {
        Self::with_mode(rows, cols, seed, MatrixMode::Dense)
    }

    pub fn with_mode(rows: usize, cols: usize, seed: u64, mode: MatrixMode) -> Self {
        let mut m = Self {
            rows,
            cols,
            seed,
            dense: None,
        };
        if mode == MatrixMode::Dense {
            let mut data = vec![0f32; rows * cols];
            for (j, col) in data.chunks_exact_mut(rows.max(1)).enumerate() {
                m.fill_column(j, col);
            }
            m.dense = Some(data);
        }
        m
    }

    fn fill_column(&self, j: usize, col: &mut [f32]) {
        let mut rng = rng::stream(self.seed, Stream::Matrix, j as u64);
        let scale = 1.0 / (self.rows as f64).sqrt();
        for x in col.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x = (z * scale) as f32;
        }
    }

    /// Channel uses `n`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> MatrixMode {
        if self.dense.is_some() {
            MatrixMode::Dense
        } else {
            MatrixMode::Regenerate
        }
    }

    /// Column `j` as stored (`f32`).
    pub fn column(&self, j: usize) -> Vec<f32> {
        match &self.dense {
            Some(d) => d[j * self.rows..(j + 1) * self.rows].to_vec(),
            None => {
                let mut c = vec![0f32; self.rows];
                self.fill_column(j, &mut c);
                c
            }
        }
    }

    fn for_each_column(&self, mut f: impl FnMut(usize, &[f32])) {
        match &self.dense {
            Some(d) => {
                for (j, col) in d.chunks_exact(self.rows.max(1)).enumerate().take(self.cols) {
                    f(j, col);
                }
            }
            None => {
                let mut buf = vec![0f32; self.rows];
                for j in 0..self.cols {
                    self.fill_column(j, &mut buf);
                    f(j, &buf);
                }
            }
        }
    }

    /// `A s`. Zero entries of `s` are skipped.
    pub fn mul(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.cols {
            return Err(Error::Dimension {
                expected: self.cols,
                got: s.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        if self.dense.is_none() {
            // only regenerate the columns that contribute
            let mut buf = vec![0f32; self.rows];
            for (j, &w) in s.iter().enumerate() {
                if w != 0.0 {
                    self.fill_column(j, &mut buf);
                    axpy(w, &buf, &mut out);
                }
            }
            return Ok(out);
        }
        self.for_each_column(|j, col| {
            let w = s[j];
            if w != 0.0 {
                axpy(w, col, &mut out);
            }
        });
        Ok(out)
    }

    /// `Aᵀ z`.
    pub fn mul_transpose(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.rows {
            return Err(Error::Dimension {
                expected: self.rows,
                got: z.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        self.for_each_column(|j, col| {
            out[j] = col.iter().zip(z).map(|(&a, &b)| a as f64 * b).sum();
        });
        Ok(out)
    }
}

#[inline]
fn axpy(w: f64, col: &[f32], out: &mut [f64]) {
    for (o, &a) in out.iter_mut().zip(col) {
        *o += w * a as f64;
    }
}

/// Channel input `x = A s`.
pub fn transmit(s: &SparseState, a: &DesignMatrix) -> Result<Vec<f64>> {
    a.mul(s.as_slice())
}

/// `y = x + z` with `z ~ N(0, σ² I)` drawn from `rng`.
pub fn awgn_with(x: &[f64], sigma2: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("noise variance {sigma2} is invalid")));
    }
    let sigma = sigma2.sqrt();
    Ok(x.iter()
        .map(|&xi| {
            let z: f64 = rng.sample(StandardNormal);
            xi + sigma * z
        })
        .collect())
}

/// AWGN from the noise stream `index` of `seed`.
pub fn awgn(x: &[f64], sigma2: f64, seed: u64, index: u64) -> Result<Vec<f64>> {
    awgn_with(x, sigma2, &mut rng::stream(seed, Stream::Noise, index))
}

/// Noise variance for a given `E_b/N_0` with `E‖x‖² = L`.
pub fn snr_to_sigma2(ebno_db: f64, info_bits: usize, sections: usize) -> f64 {
    sections as f64 / (2.0 * info_bits as f64 * 10f64.powf(ebno_db / 10.0))
}

/// Inverse of [`snr_to_sigma2`].
pub fn sigma2_to_snr(sigma2: f64, info_bits: usize, sections: usize) -> f64 {
    10.0 * (sections as f64 / (2.0 * info_bits as f64 * sigma2)).log10()
}
