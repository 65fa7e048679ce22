//! Non-binary LDPC outer code: edge-labelled Tanner graph, PEG construction,
//! systematic encoder and the alist-style text format.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gf::{FieldElem, GaloisField};
use crate::rng::{self, Stream};

/// Labelled edge between variable node `var` and check node `check`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub var: usize,
    pub check: usize,
    pub label: FieldElem,
}

/// Tanner graph of a GF(q) LDPC code.
///
/// Edges are stored grouped by check node (in slot order within a check),
/// so the edges of check `p` are `edges()[check_range(p)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdpcCode {
    field: GaloisField,
    num_vars: usize,
    num_checks: usize,
    edges: Vec<Edge>,
    check_offsets: Vec<usize>,
    var_edges: Vec<Vec<usize>>,
    girth: Option<usize>,
}

impl LdpcCode {
    /// Build a code from an explicit edge list. Edges are regrouped by check
    /// with their relative order preserved.
    pub fn from_edges(
        field: GaloisField,
        num_vars: usize,
        num_checks: usize,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        for e in &edges {
            if e.var >= num_vars || e.check >= num_checks {
                return Err(Error::Construction(format!(
                    "edge ({}, {}) outside a {num_vars}x{num_checks} graph",
                    e.var, e.check
                )));
            }
            if e.label == 0 || e.label as usize >= field.q() {
                return Err(Error::Construction(format!(
                    "edge ({}, {}) has invalid label {}",
                    e.var, e.check, e.label
                )));
            }
        }
        let mut edges = edges;
        edges.sort_by_key(|e| e.check);
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for e in &edges {
            if !seen.insert((e.var, e.check)) {
                return Err(Error::Construction(format!(
                    "parallel edge between v{} and c{}",
                    e.var, e.check
                )));
            }
        }
        let mut check_offsets = vec![0; num_checks + 1];
        for e in &edges {
            check_offsets[e.check + 1] += 1;
        }
        for p in 0..num_checks {
            check_offsets[p + 1] += check_offsets[p];
        }
        let mut var_edges = vec![Vec::new(); num_vars];
        for (idx, e) in edges.iter().enumerate() {
            var_edges[e.var].push(idx);
        }
        let mut code = Self {
            field,
            num_vars,
            num_checks,
            edges,
            check_offsets,
            var_edges,
            girth: None,
        };
        code.girth = code.compute_girth();
        Ok(code)
    }

    /// A code without parity checks, i.e. a bare SPARC.
    pub fn uncoded(field: GaloisField, num_vars: usize) -> Self {
        Self::from_edges(field, num_vars, 0, Vec::new()).expect("empty graph is valid")
    }

    /// Progressive edge growth with regular variable degree `dv`.
    ///
    /// Each new edge of a variable goes to a check at maximal distance in the
    /// current graph (unreachable counts as infinite). Ties go to the check
    /// of lowest current degree, then to the lowest position in a
    /// seed-dependent ordering of the checks. All labels are 1.
    pub fn peg(
        field: GaloisField,
        num_vars: usize,
        num_checks: usize,
        dv: usize,
        seed: u64,
    ) -> Result<Self> {
        if num_checks < 1 || num_vars <= num_checks {
            return Err(Error::Construction(format!(
                "PEG needs L > P >= 1, got L = {num_vars}, P = {num_checks}"
            )));
        }
        if dv < 2 || dv > num_checks {
            return Err(Error::Construction(format!(
                "variable degree {dv} not placeable with {num_checks} checks"
            )));
        }
        let mut priority: Vec<usize> = (0..num_checks).collect();
        priority.shuffle(&mut rng::stream(seed, Stream::Graph, 0));
        let mut rank = vec![0; num_checks];
        for (pos, &c) in priority.iter().enumerate() {
            rank[c] = pos;
        }

        let mut var_adj: Vec<Vec<usize>> = vec![Vec::with_capacity(dv); num_vars];
        let mut check_adj: Vec<Vec<usize>> = vec![Vec::new(); num_checks];
        let mut edges = Vec::with_capacity(num_vars * dv);
        let mut dist = vec![usize::MAX; num_checks];
        let mut var_seen = vec![false; num_vars];
        let mut queue = VecDeque::new();

        for v in 0..num_vars {
            for _ in 0..dv {
                // BFS over checks from v, distance counted in check layers
                dist.iter_mut().for_each(|d| *d = usize::MAX);
                var_seen.iter_mut().for_each(|s| *s = false);
                queue.clear();
                var_seen[v] = true;
                for &c in &var_adj[v] {
                    dist[c] = 0;
                    queue.push_back(c);
                }
                while let Some(c) = queue.pop_front() {
                    for &u in &check_adj[c] {
                        if var_seen[u] {
                            continue;
                        }
                        var_seen[u] = true;
                        for &c2 in &var_adj[u] {
                            if dist[c2] == usize::MAX {
                                dist[c2] = dist[c] + 1;
                                queue.push_back(c2);
                            }
                        }
                    }
                }
                let best = (0..num_checks)
                    .filter(|c| !var_adj[v].contains(c))
                    .max_by(|&a, &b| {
                        dist[a]
                            .cmp(&dist[b])
                            .then(check_adj[b].len().cmp(&check_adj[a].len()))
                            .then(rank[b].cmp(&rank[a]))
                    })
                    .ok_or_else(|| {
                        Error::Construction(format!("no check available for variable {v}"))
                    })?;
                var_adj[v].push(best);
                check_adj[best].push(v);
                edges.push(Edge {
                    var: v,
                    check: best,
                    label: 1,
                });
            }
        }
        Self::from_edges(field, num_vars, num_checks, edges)
    }

    /// Copy of this code with labels drawn i.i.d. uniform on `1..q`.
    pub fn with_random_labels(&self, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Stream::Labels, 0);
        let q = self.field.q();
        let mut out = self.clone();
        for e in &mut out.edges {
            e.label = if q == 2 {
                1
            } else {
                rng.gen_range(1..q) as FieldElem
            };
        }
        out
    }

    pub fn field(&self) -> &GaloisField {
        &self.field
    }

    pub fn q(&self) -> usize {
        self.field.q()
    }

    /// Number of variable nodes `L`.
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Number of check nodes `P`.
    pub fn num_checks(&self) -> usize {
        self.num_checks
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge indices of check `p`.
    pub fn check_range(&self, p: usize) -> std::ops::Range<usize> {
        self.check_offsets[p]..self.check_offsets[p + 1]
    }

    /// Edge indices of variable `v`, ascending.
    pub fn var_edges(&self, v: usize) -> &[usize] {
        &self.var_edges[v]
    }

    /// Length of the shortest cycle, `None` for a forest.
    pub fn girth(&self) -> Option<usize> {
        self.girth
    }

    pub fn design_rate(&self) -> f64 {
        1.0 - self.num_checks as f64 / self.num_vars as f64
    }

    /// True iff every parity constraint holds for `v`.
    pub fn syndrome_check(&self, v: &[FieldElem]) -> bool {
        if v.len() != self.num_vars {
            return false;
        }
        (0..self.num_checks).all(|p| self.check_sum(p, v) == 0)
    }

    fn check_sum(&self, p: usize, v: &[FieldElem]) -> FieldElem {
        self.edges[self.check_range(p)]
            .iter()
            .fold(0, |acc, e| acc ^ self.field.mul(e.label, v[e.var]))
    }

    fn compute_girth(&self) -> Option<usize> {
        // node ids: variables 0..L, checks L..L+P
        let n_nodes = self.num_vars + self.num_checks;
        let neighbors = |node: usize| -> Vec<(usize, usize)> {
            if node < self.num_vars {
                self.var_edges[node]
                    .iter()
                    .map(|&e| (self.num_vars + self.edges[e].check, e))
                    .collect()
            } else {
                self.check_range(node - self.num_vars)
                    .map(|e| (self.edges[e].var, e))
                    .collect()
            }
        };
        let mut best = usize::MAX;
        let mut dist = vec![usize::MAX; n_nodes];
        let mut parent_edge = vec![usize::MAX; n_nodes];
        let mut queue = VecDeque::new();
        for root in 0..self.num_vars {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            queue.clear();
            dist[root] = 0;
            parent_edge[root] = usize::MAX;
            queue.push_back(root);
            'bfs: while let Some(u) = queue.pop_front() {
                if 2 * dist[u] + 1 >= best {
                    break;
                }
                for (w, e) in neighbors(u) {
                    if e == parent_edge[u] {
                        continue;
                    }
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        parent_edge[w] = e;
                        queue.push_back(w);
                    } else {
                        best = best.min(dist[u] + dist[w] + 1);
                        if best == 4 {
                            break 'bfs;
                        }
                    }
                }
            }
            if best == 4 {
                break;
            }
        }
        (best != usize::MAX).then_some(best)
    }

    /// Write the text format: a `q L P girth poly_hex` header followed by one
    /// `var check label` line per edge, zero-based. Girth 0 means acyclic.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {} {} {:#x}",
            self.q(),
            self.num_vars,
            self.num_checks,
            self.girth.unwrap_or(0),
            self.field.polynomial()
        );
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.var, e.check, e.label);
        }
        s
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty code file".into()))??;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 5 {
            return Err(Error::Parse(format!("bad header line: {header:?}")));
        }
        let num = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Parse(format!("not an integer: {s:?}")))
        };
        let q = num(h[0])?;
        let num_vars = num(h[1])?;
        let num_checks = num(h[2])?;
        let girth = num(h[3])?;
        let poly = u32::from_str_radix(h[4].trim_start_matches("0x"), 16)
            .map_err(|_| Error::Parse(format!("bad polynomial: {:?}", h[4])))?;
        if !q.is_power_of_two() || q < 2 {
            return Err(Error::Parse(format!("q = {q} is not a power of two")));
        }
        let field = GaloisField::with_polynomial(q.trailing_zeros(), poly)?;
        let mut edges = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("bad edge line: {line:?}")));
            }
            edges.push(Edge {
                var: num(f[0])?,
                check: num(f[1])?,
                label: num(f[2])? as FieldElem,
            });
        }
        let code = Self::from_edges(field, num_vars, num_checks, edges)?;
        if code.girth.unwrap_or(0) != girth {
            return Err(Error::Parse(format!(
                "recorded girth {girth} does not match computed {}",
                code.girth.unwrap_or(0)
            )));
        }
        Ok(code)
    }
}

/// Systematic encoder derived from the parity-check matrix by Gaussian
/// elimination over GF(q).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderMap {
    /// Codeword positions that carry message symbols, ascending.
    message_positions: Vec<usize>,
    /// Codeword positions of the parity symbols, one per check row.
    parity_positions: Vec<usize>,
    /// For each parity symbol, `(message index, coefficient)` pairs.
    parity_rows: Vec<Vec<(usize, FieldElem)>>,
    num_vars: usize,
}

impl EncoderMap {
    /// Row-reduce `H`. Fails with the effective rank if `H` is not full rank.
    pub fn new(code: &LdpcCode) -> Result<Self> {
        let f = code.field();
        let rows = code.num_checks();
        let cols = code.num_vars();
        let mut h = vec![vec![0 as FieldElem; cols]; rows];
        for e in code.edges() {
            h[e.check][e.var] = e.label;
        }
        let mut pivots = Vec::with_capacity(rows);
        let mut rank = 0;
        // scan from the last column so parity symbols land at the tail
        for c in (0..cols).rev() {
            if rank == rows {
                break;
            }
            let Some(pr) = (rank..rows).find(|&r| h[r][c] != 0) else {
                continue;
            };
            h.swap(rank, pr);
            let inv = f.inv(h[rank][c])?;
            for x in h[rank].iter_mut() {
                *x = f.mul(*x, inv);
            }
            let pivot_row = h[rank].clone();
            for (r, row) in h.iter_mut().enumerate() {
                if r == rank || row[c] == 0 {
                    continue;
                }
                let factor = row[c];
                for (x, &p) in row.iter_mut().zip(&pivot_row) {
                    if p != 0 {
                        *x ^= f.mul(factor, p);
                    }
                }
            }
            pivots.push(c);
            rank += 1;
        }
        if rank < rows {
            return Err(Error::RankDeficient { rank, rows });
        }
        let mut is_pivot = vec![false; cols];
        pivots.iter().for_each(|&c| is_pivot[c] = true);
        let message_positions: Vec<usize> = (0..cols).filter(|&c| !is_pivot[c]).collect();
        let parity_rows = (0..rows)
            .map(|r| {
                message_positions
                    .iter()
                    .enumerate()
                    .filter(|&(_, &c)| h[r][c] != 0)
                    .map(|(k, &c)| (k, h[r][c]))
                    .collect()
            })
            .collect();
        Ok(Self {
            message_positions,
            parity_positions: pivots,
            parity_rows,
            num_vars: cols,
        })
    }

    /// Number of message symbols `k = L - P`.
    pub fn k(&self) -> usize {
        self.message_positions.len()
    }

    pub fn message_positions(&self) -> &[usize] {
        &self.message_positions
    }

    pub fn parity_positions(&self) -> &[usize] {
        &self.parity_positions
    }

    pub fn encode(&self, field: &GaloisField, msg: &[FieldElem]) -> Result<Vec<FieldElem>> {
        if msg.len() != self.k() {
            return Err(Error::Dimension {
                expected: self.k(),
                got: msg.len(),
            });
        }
        let mut v = vec![0 as FieldElem; self.num_vars];
        for (&pos, &s) in self.message_positions.iter().zip(msg) {
            v[pos] = s;
        }
        for (row, &pos) in self.parity_rows.iter().zip(&self.parity_positions) {
            v[pos] = row
                .iter()
                .fold(0, |acc, &(k, coeff)| acc ^ field.mul(coeff, msg[k]));
        }
        Ok(v)
    }

    /// Message symbols read back from a codeword.
    pub fn extract(&self, v: &[FieldElem]) -> Vec<FieldElem> {
        self.message_positions.iter().map(|&p| v[p]).collect()
    }
}

/// A labelled code together with its encoder.
#[derive(Debug, Clone)]
pub struct SystematicCode {
    pub code: LdpcCode,
    pub encoder: EncoderMap,
}

/// Attempts made to find full-rank labels before giving up.
pub const LABEL_ATTEMPTS: u64 = 16;

impl SystematicCode {
    /// PEG graph plus random labels; rank-deficient label draws are retried
    /// with `seed + 1, seed + 2, ...`.
    pub fn random(
        field: GaloisField,
        num_vars: usize,
        num_checks: usize,
        dv: usize,
        seed: u64,
    ) -> Result<Self> {
        if num_checks == 0 {
            let code = LdpcCode::uncoded(field, num_vars);
            let encoder = EncoderMap::new(&code)?;
            return Ok(Self { code, encoder });
        }
        let graph = LdpcCode::peg(field, num_vars, num_checks, dv, seed)?;
        Self::label(&graph, seed)
    }

    /// Label an existing graph, retrying on rank deficiency.
    pub fn label(graph: &LdpcCode, seed: u64) -> Result<Self> {
        let mut last = None;
        for attempt in 0..LABEL_ATTEMPTS {
            let code = graph.with_random_labels(seed.wrapping_add(attempt));
            match EncoderMap::new(&code) {
                Ok(encoder) => return Ok(Self { code, encoder }),
                Err(e @ Error::RankDeficient { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    pub fn from_code(code: LdpcCode) -> Result<Self> {
        let encoder = EncoderMap::new(&code)?;
        Ok(Self { code, encoder })
    }

    /// Information bits carried per codeword.
    pub fn info_bits(&self) -> usize {
        self.encoder.k() * self.code.field().m() as usize
    }

    pub fn encode_bits(&self, bits: &[u8]) -> Result<Vec<FieldElem>> {
        let msg = bits_to_symbols(bits, self.code.field().m())?;
        self.encoder.encode(self.code.field(), &msg)
    }

    pub fn decode_bits(&self, v: &[FieldElem]) -> Vec<u8> {
        symbols_to_bits(&self.encoder.extract(v), self.code.field().m())
    }
}

/// Pack bits (0/1) into big-endian `m`-bit symbols.
pub fn bits_to_symbols(bits: &[u8], m: u32) -> Result<Vec<FieldElem>> {
    let m = m as usize;
    if m == 0 || !bits.len().is_multiple_of(m) {
        return Err(Error::Domain(format!(
            "{} bits do not split into {m}-bit symbols",
            bits.len()
        )));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::Domain("bit values must be 0 or 1".into()));
    }
    Ok(bits
        .chunks_exact(m)
        .map(|c| c.iter().fold(0, |acc, &b| (acc << 1) | b as FieldElem))
        .collect())
}

pub fn symbols_to_bits(symbols: &[FieldElem], m: u32) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|&s| (0..m).rev().map(move |i| ((s >> i) & 1) as u8))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gf(m: u32) -> GaloisField {
        GaloisField::new(m).unwrap()
    }

    fn random_msg(rng: &mut impl Rng, k: usize, q: usize) -> Vec<FieldElem> {
        (0..k).map(|_| rng.gen_range(0..q) as FieldElem).collect()
    }

    #[test]
    fn peg_small_degree_bookkeeping() {
        let code = LdpcCode::peg(gf(2), 6, 3, 2, 1).unwrap();
        assert_eq!(code.num_edges(), 12);
        for v in 0..6 {
            assert_eq!(code.var_edges(v).len(), 2);
        }
        let check_total: usize = (0..3).map(|p| code.check_range(p).len()).sum();
        assert_eq!(check_total, 12);
        assert!(code.girth().unwrap() >= 4);
    }

    #[test]
    fn peg_large_dimensions() {
        let code = LdpcCode::peg(gf(8), 766, 30, 3, 7).unwrap();
        assert_eq!(code.num_edges(), 2298);
        let mean = code.num_edges() as f64 / 30.0;
        assert!((mean - 76.6).abs() < 1e-12);
        let degs: Vec<usize> = (0..30).map(|p| code.check_range(p).len()).collect();
        assert!(degs.iter().max().unwrap() - degs.iter().min().unwrap() <= 1);
    }

    #[test]
    fn peg_is_deterministic_and_rejects_bad_profiles() {
        let a = LdpcCode::peg(gf(4), 40, 10, 3, 5).unwrap();
        let b = LdpcCode::peg(gf(4), 40, 10, 3, 5).unwrap();
        assert_eq!(a, b);
        assert!(LdpcCode::peg(gf(4), 10, 10, 3, 0).is_err());
        assert!(LdpcCode::peg(gf(4), 10, 2, 3, 0).is_err());
        assert!(LdpcCode::peg(gf(4), 10, 4, 1, 0).is_err());
    }

    #[test]
    fn peg_reaches_large_girth_on_sparse_graph() {
        // 40 variables of degree 2 over 20 checks leaves room for girth >= 6
        let code = LdpcCode::peg(gf(3), 40, 20, 2, 0).unwrap();
        assert!(code.girth().unwrap() >= 6, "girth {:?}", code.girth());
    }

    #[test]
    fn girth_of_known_graphs() {
        let e = |var, check| Edge { var, check, label: 1 };
        let tree = LdpcCode::from_edges(gf(2), 4, 2, vec![e(0, 0), e(1, 0), e(2, 0), e(2, 1), e(3, 1)]).unwrap();
        assert_eq!(tree.girth(), None);
        let four = LdpcCode::from_edges(gf(2), 2, 2, vec![e(0, 0), e(1, 0), e(0, 1), e(1, 1)]).unwrap();
        assert_eq!(four.girth(), Some(4));
        let six = LdpcCode::from_edges(
            gf(2),
            3,
            3,
            vec![e(0, 0), e(1, 0), e(1, 1), e(2, 1), e(2, 2), e(0, 2)],
        )
        .unwrap();
        assert_eq!(six.girth(), Some(6));
        assert!(LdpcCode::from_edges(gf(2), 2, 1, vec![e(0, 0), e(0, 0)]).is_err());
    }

    #[test]
    fn labels_binary_and_deterministic() {
        let g = LdpcCode::peg(gf(1), 20, 5, 3, 0).unwrap();
        assert!(g.with_random_labels(3).edges().iter().all(|e| e.label == 1));
        let g = LdpcCode::peg(gf(4), 20, 5, 3, 0).unwrap();
        assert_eq!(g.with_random_labels(9), g.with_random_labels(9));
        assert_ne!(g.with_random_labels(9), g.with_random_labels(10));
    }

    #[test]
    fn label_histogram_is_uniform() {
        // χ² goodness of fit over 10^5 edges, q = 16 (15 cells, 14 dof).
        let edges = (0..50_000)
            .flat_map(|v| {
                [v % 1000, (v + 1) % 1000].map(|check| Edge { var: v, check, label: 1 })
            })
            .collect();
        let g = LdpcCode::from_edges(gf(4), 50_000, 1_000, edges).unwrap();
        let lab = g.with_random_labels(17);
        let mut counts = [0usize; 16];
        for e in lab.edges() {
            counts[e.label as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        let expected = lab.num_edges() as f64 / 15.0;
        let chi2: f64 = counts[1..]
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 99th percentile of χ²(14)
        assert!(chi2 < 29.141, "chi2 = {chi2}");
    }

    #[test]
    fn encoder_properties() {
        let sc = SystematicCode::random(gf(4), 128, 8, 3, 1).unwrap();
        let f = sc.code.field().clone();
        assert_eq!(sc.encoder.k(), 120);
        assert_eq!(
            sc.encoder.encode(&f, &vec![0; 120]).unwrap(),
            vec![0; 128]
        );
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let a = random_msg(&mut rng, 120, 16);
            let b = random_msg(&mut rng, 120, 16);
            let ca = sc.encoder.encode(&f, &a).unwrap();
            let cb = sc.encoder.encode(&f, &b).unwrap();
            assert!(sc.code.syndrome_check(&ca));
            let ab: Vec<_> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let sum: Vec<_> = ca.iter().zip(&cb).map(|(x, y)| x ^ y).collect();
            assert_eq!(sc.encoder.encode(&f, &ab).unwrap(), sum);
            assert_eq!(sc.encoder.extract(&ca), a);
        }
    }

    #[test]
    fn syndrome_detects_errors() {
        let sc = SystematicCode::random(gf(8), 766, 30, 3, 3).unwrap();
        let f = sc.code.field().clone();
        assert!(sc.code.syndrome_check(&vec![0; 766]));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let msg = random_msg(&mut rng, 736, 256);
        let mut c = sc.encoder.encode(&f, &msg).unwrap();
        assert!(sc.code.syndrome_check(&c));
        c[17] ^= 0x5a;
        assert!(!sc.code.syndrome_check(&c));
        let hits = (0..200)
            .filter(|_| sc.code.syndrome_check(&random_msg(&mut rng, 766, 256)))
            .count();
        assert_eq!(hits, 0);
    }

    #[test]
    fn rank_deficiency_reported() {
        // two identical rows
        let e = |var, check| Edge { var, check, label: 1 };
        let code = LdpcCode::from_edges(
            gf(2),
            4,
            2,
            vec![e(0, 0), e(1, 0), e(0, 1), e(1, 1)],
        )
        .unwrap();
        match EncoderMap::new(&code) {
            Err(Error::RankDeficient { rank, rows }) => assert_eq!((rank, rows), (1, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn uncoded_encoder_is_identity() {
        let sc = SystematicCode::random(gf(4), 10, 0, 3, 0).unwrap();
        let msg: Vec<FieldElem> = (0..10).collect();
        assert_eq!(sc.encoder.encode(sc.code.field(), &msg).unwrap(), msg);
    }

    #[test]
    fn bit_packing() {
        assert_eq!(bits_to_symbols(&[0, 1, 0, 1], 4).unwrap(), vec![5]);
        assert!(bits_to_symbols(&[0, 1, 0], 4).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bits: Vec<u8> = (0..5888).map(|_| rng.gen_range(0..2)).collect();
        let syms = bits_to_symbols(&bits, 8).unwrap();
        assert_eq!(syms.len(), 736);
        assert_eq!(symbols_to_bits(&syms, 8), bits);
    }

    #[test]
    fn text_format_round_trip() {
        let sc = SystematicCode::random(gf(4), 60, 6, 3, 11).unwrap();
        let text = sc.code.to_text();
        let back = LdpcCode::read_from(text.as_bytes()).unwrap();
        assert_eq!(back, sc.code);
        assert_eq!(back.to_text(), text);
        assert!(text.starts_with(&format!("16 60 6 {} 0x13\n", sc.code.girth().unwrap())));
        assert!(LdpcCode::read_from("16 60 6\n".as_bytes()).is_err());
    }
}
