//! Simulation configuration: flat `key = value` text.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::bp::Schedule;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Whether the design matrix is drawn once per run or once per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixPolicy {
    Fixed,
    PerTrial,
}

impl FromStr for MatrixPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "per_trial" => Ok(Self::PerTrial),
            _ => Err(Error::Config(format!("matrix_policy must be fixed or per_trial, got {s:?}"))),
        }
    }
}

impl MatrixPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::PerTrial => "per_trial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub m: u32,
    pub l: usize,
    pub p: usize,
    pub dv: usize,
    pub n: usize,
    pub ebno_db: Vec<f64>,
    pub amp_iters: usize,
    #[serde(serialize_with = "ser_display")]
    pub schedule: Schedule,
    pub final_bp_iters: usize,
    pub seed: u64,
    pub graph_seed: u64,
    pub matrix_seed: u64,
    pub message_seed: u64,
    pub noise_seed: u64,
    pub trials: usize,
    pub target_errors: usize,
    pub matrix_policy: MatrixPolicy,
    pub psi_samples: usize,
}

fn ser_display<S: serde::Serializer>(v: &Schedule, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

const KEYS: &[&str] = &[
    "m",
    "L",
    "P",
    "dv",
    "B",
    "n",
    "ebno_db",
    "amp_iters",
    "schedule",
    "final_bp_iters",
    "seed",
    "graph_seed",
    "matrix_seed",
    "message_seed",
    "noise_seed",
    "trials",
    "target_errors",
    "matrix_policy",
    "psi_samples",
];

impl Default for SimConfig {
    /// q = 16, L = 128, P = 8, dv = 3, n = 600.
    fn default() -> Self {
        Self::with_seed(1)
    }
}

impl SimConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            m: 4,
            l: 128,
            p: 8,
            dv: 3,
            n: 600,
            ebno_db: vec![3.0, 3.5, 4.0, 4.5, 5.0, 5.5],
            amp_iters: 25,
            schedule: Schedule::BpN,
            final_bp_iters: 100,
            seed,
            graph_seed: derive_seed(seed, 1),
            matrix_seed: derive_seed(seed, 2),
            message_seed: derive_seed(seed, 3),
            noise_seed: derive_seed(seed, 4),
            trials: 2000,
            target_errors: 50,
            matrix_policy: MatrixPolicy::Fixed,
            psi_samples: crate::se::DEFAULT_PSI_SAMPLES,
        }
    }

    pub fn q(&self) -> usize {
        1 << self.m
    }

    /// Information bits per codeword.
    pub fn info_bits(&self) -> usize {
        (self.l - self.p) * self.m as usize
    }

    pub fn overall_rate(&self) -> f64 {
        self.info_bits() as f64 / self.n as f64
    }

    /// Replace the master seed and every derived seed.
    pub fn reseed(&mut self, seed: u64) {
        let s = Self::with_seed(seed);
        self.seed = s.seed;
        self.graph_seed = s.graph_seed;
        self.matrix_seed = s.matrix_seed;
        self.message_seed = s.message_seed;
        self.noise_seed = s.noise_seed;
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=8).contains(&self.m) {
            return bad(format!("m must be in 1..=8, got {}", self.m));
        }
        if self.l == 0 || self.p >= self.l {
            return bad(format!("need 0 ≤ P < L, got L = {}, P = {}", self.l, self.p));
        }
        if self.p > 0 && (self.dv == 0 || self.dv > self.p) {
            return bad(format!("dv must be in 1..=P, got {}", self.dv));
        }
        if self.n == 0 || self.trials == 0 || self.target_errors == 0 || self.psi_samples < 100 {
            return bad("n, trials, target_errors and psi_samples must be positive".into());
        }
        if self.ebno_db.is_empty() || self.ebno_db.iter().any(|x| !x.is_finite()) {
            return bad("ebno_db must list at least one finite value".into());
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key {k:?}", no + 1)));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k:?}", no + 1)));
            }
        }
        let mut c = match map.get("seed") {
            Some(v) => Self::with_seed(num(v, "seed")?),
            None => Self::default(),
        };
        for (k, v) in &map {
            match k.as_str() {
                "m" => c.m = num(v, k)?,
                "L" => c.l = num(v, k)?,
                "P" => c.p = num(v, k)?,
                "dv" => c.dv = num(v, k)?,
                "n" => c.n = num(v, k)?,
                "B" | "seed" => {}
                "ebno_db" => {
                    c.ebno_db = v
                        .split(',')
                        .map(|x| num::<f64>(x.trim(), k))
                        .collect::<Result<_>>()?
                }
                "amp_iters" => c.amp_iters = num(v, k)?,
                "schedule" => {
                    c.schedule = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?
                }
                "final_bp_iters" => c.final_bp_iters = num(v, k)?,
                "graph_seed" => c.graph_seed = num(v, k)?,
                "matrix_seed" => c.matrix_seed = num(v, k)?,
                "message_seed" => c.message_seed = num(v, k)?,
                "noise_seed" => c.noise_seed = num(v, k)?,
                "trials" => c.trials = num(v, k)?,
                "target_errors" => c.target_errors = num(v, k)?,
                "matrix_policy" => c.matrix_policy = v.parse()?,
                "psi_samples" => c.psi_samples = num(v, k)?,
                _ => unreachable!(),
            }
        }
        c.validate()?;
        if let Some(b) = map.get("B") {
            let b: usize = num(b, "B")?;
            if b != c.info_bits() {
                return Err(Error::Config(format!(
                    "B = {b} but (L − P)·m = {}",
                    c.info_bits()
                )));
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let eb: Vec<String> = self.ebno_db.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "m = {}", self.m);
        let _ = writeln!(s, "L = {}", self.l);
        let _ = writeln!(s, "P = {}", self.p);
        let _ = writeln!(s, "dv = {}", self.dv);
        let _ = writeln!(s, "B = {}", self.info_bits());
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "ebno_db = {}", eb.join(","));
        let _ = writeln!(s, "amp_iters = {}", self.amp_iters);
        let _ = writeln!(s, "schedule = {}", self.schedule);
        let _ = writeln!(s, "final_bp_iters = {}", self.final_bp_iters);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "graph_seed = {}", self.graph_seed);
        let _ = writeln!(s, "matrix_seed = {}", self.matrix_seed);
        let _ = writeln!(s, "message_seed = {}", self.message_seed);
        let _ = writeln!(s, "noise_seed = {}", self.noise_seed);
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "target_errors = {}", self.target_errors);
        let _ = writeln!(s, "matrix_policy = {}", self.matrix_policy.as_str());
        let _ = writeln!(s, "psi_samples = {}", self.psi_samples);
        s
    }
}

fn num<T: FromStr>(v: &str, key: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
}
