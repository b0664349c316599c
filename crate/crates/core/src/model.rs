//! QSAP data assembled from an [`Instance`]: the unary vector `a`, the
//! block-sparse pairwise matrix `B`, and the objective/gradient/support
//! primitives shared by the solver, rounding, and tests.

use thiserror::Error;

use crate::instance::{Assignment, Instance};

/// One off-diagonal block of `B`, stored once for `i < j` with implicit
/// transpose access for the `(j, i)` side.
#[derive(Debug, Clone)]
pub struct PairBlock {
    pub i: usize,
    pub j: usize,
    /// Row-major `l_i x l_j` real view of the energies.
    pub data: Vec<f64>,
    /// The same energies in exact integer form.
    pub data_int: Vec<i64>,
    cols: usize,
}

impl PairBlock {
    #[inline]
    pub fn at(&self, r: usize, s: usize) -> f64 {
        self.data[r * self.cols + s]
    }

    #[inline]
    pub fn at_int(&self, r: usize, s: usize) -> i64 {
        self.data_int[r * self.cols + s]
    }
}

/// Assembled QSAP model; immutable after build and safe to share.
#[derive(Debug, Clone)]
pub struct QsapModel {
    pub n: usize,
    pub m: usize,
    /// Start index of each block, plus a trailing sentinel equal to `m`.
    pub block_offsets: Vec<usize>,
    pub rotamer_counts: Vec<usize>,
    /// Unary energy vector (integers embedded in reals).
    pub a: Vec<f64>,
    pub a_int: Vec<i64>,
    blocks: Vec<PairBlock>,
    /// Per position: indices into `blocks` touching that position.
    adjacency: Vec<Vec<usize>>,
}

/// Dense length-`m` vector with the model's block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub values: Vec<f64>,
}

impl Point {
    pub fn new(values: Vec<f64>) -> Self {
        Point { values }
    }

    pub fn zeros(m: usize) -> Self {
        Point { values: vec![0.0; m] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl From<Vec<f64>> for Point {
    fn from(values: Vec<f64>) -> Self {
        Point { values }
    }
}

/// Support structure of an iterate: positive entries, per-block argmax
/// profiles with ties recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    /// Per position: sorted local rotamer indices with `x > eps`.
    pub per_position: Vec<Vec<usize>>,
    /// Global indices with `x > eps` (the set Gamma).
    pub gamma: Vec<usize>,
    /// Per position: all local indices attaining the block max within eps.
    pub argmax: Vec<Vec<usize>>,
}

impl SupportSet {
    /// Number of (numerically) nonzero entries.
    pub fn nnz(&self) -> usize {
        self.gamma.len()
    }

    /// True iff every block has a single argmax at this resolution.
    pub fn argmax_unique(&self) -> bool {
        self.argmax.iter().all(|j| j.len() == 1)
    }
}

/// Per-position simplex residuals and the most negative entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    /// `r_i = sum_r x^(i)_r - 1` for each position.
    pub residuals: Vec<f64>,
    /// Most negative entry of `x`, or 0 if none are negative.
    pub min_entry: f64,
}

impl Feasibility {
    pub fn max_violation(&self) -> f64 {
        let r = self
            .residuals
            .iter()
            .fold(0.0f64, |acc, &r| acc.max(r.abs()));
        r.max(-self.min_entry)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("integer overflow while evaluating the exact objective")]
pub struct EnergyOverflow;

/// Assembles `(a, B)` from a validated instance.
pub fn build_model(inst: &Instance) -> QsapModel {
    let n = inst.n;
    let mut block_offsets = Vec::with_capacity(n + 1);
    let mut m = 0;
    for &l in &inst.rotamer_counts {
        block_offsets.push(m);
        m += l;
    }
    block_offsets.push(m);

    let mut a_int = vec![0i64; m];
    for (&(i, r), &e) in &inst.unary {
        a_int[block_offsets[i] + r] = e;
    }
    let a: Vec<f64> = a_int.iter().map(|&v| v as f64).collect();

    // One dense block per position pair that has at least one energy.
    let mut blocks: Vec<PairBlock> = Vec::new();
    let mut block_of_pair: std::collections::HashMap<(usize, usize), usize> =
        std::collections::HashMap::new();
    for (&(i, r, j, s), &e) in &inst.pairwise {
        let idx = *block_of_pair.entry((i, j)).or_insert_with(|| {
            let li = inst.rotamer_counts[i];
            let lj = inst.rotamer_counts[j];
            blocks.push(PairBlock {
                i,
                j,
                data: vec![0.0; li * lj],
                data_int: vec![0i64; li * lj],
                cols: lj,
            });
            blocks.len() - 1
        });
        let b = &mut blocks[idx];
        b.data_int[r * b.cols + s] = e;
        b.data[r * b.cols + s] = e as f64;
    }
    blocks.sort_by_key(|b| (b.i, b.j));

    let mut adjacency = vec![Vec::new(); n];
    for (idx, b) in blocks.iter().enumerate() {
        adjacency[b.i].push(idx);
        adjacency[b.j].push(idx);
    }

    QsapModel {
        n,
        m,
        block_offsets,
        rotamer_counts: inst.rotamer_counts.clone(),
        a,
        a_int,
        blocks,
        adjacency,
    }
}

impl QsapModel {
    pub fn blocks(&self) -> &[PairBlock] {
        &self.blocks
    }

    /// Slice of `x` covering block `i`.
    #[inline]
    pub fn block<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[self.block_offsets[i]..self.block_offsets[i + 1]]
    }

    fn check_dim(&self, x: &Point) {
        assert_eq!(
            x.len(),
            self.m,
            "point dimension {} does not match model dimension {}",
            x.len(),
            self.m
        );
    }

    /// `f(x) = 1/2 x'Bx + a'x`, each present block pair counted once.
    pub fn objective(&self, x: &Point) -> f64 {
        self.check_dim(x);
        let v = &x.values;
        let mut f: f64 = self.a.iter().zip(v).map(|(a, x)| a * x).sum();
        for b in &self.blocks {
            let xi = self.block(v, b.i);
            let xj = self.block(v, b.j);
            let mut acc = 0.0;
            for (r, &xr) in xi.iter().enumerate() {
                if xr == 0.0 {
                    continue;
                }
                let row = &b.data[r * b.cols..(r + 1) * b.cols];
                acc += xr * row.iter().zip(xj).map(|(brs, xs)| brs * xs).sum::<f64>();
            }
            f += acc;
        }
        f
    }

    /// Exact integer objective of a binary assignment.
    pub fn objective_exact(&self, asg: &Assignment) -> Result<i64, EnergyOverflow> {
        assert_eq!(asg.len(), self.n, "assignment length mismatch");
        let mut total: i64 = 0;
        for (i, &r) in asg.choices.iter().enumerate() {
            assert!(r < self.rotamer_counts[i], "rotamer index out of range");
            total = total
                .checked_add(self.a_int[self.block_offsets[i] + r])
                .ok_or(EnergyOverflow)?;
        }
        for b in &self.blocks {
            total = total
                .checked_add(b.at_int(asg.choices[b.i], asg.choices[b.j]))
                .ok_or(EnergyOverflow)?;
        }
        Ok(total)
    }

    /// `a + Bx`.
    pub fn gradient(&self, x: &Point) -> Point {
        self.check_dim(x);
        let v = &x.values;
        let mut g = self.a.clone();
        for b in &self.blocks {
            let xi = self.block(v, b.i);
            let xj = self.block(v, b.j);
            let oi = self.block_offsets[b.i];
            let oj = self.block_offsets[b.j];
            for r in 0..xi.len() {
                let row = &b.data[r * b.cols..(r + 1) * b.cols];
                // g_i += B_ij x_j
                g[oi + r] += row.iter().zip(xj).map(|(brs, xs)| brs * xs).sum::<f64>();
                // g_j += B_ij' x_i
                let xr = xi[r];
                if xr != 0.0 {
                    for (s, brs) in row.iter().enumerate() {
                        g[oj + s] += brs * xr;
                    }
                }
            }
        }
        Point::new(g)
    }

    /// The `i`-th block of the gradient; independent of `x^(i)`.
    pub fn block_gradient(&self, x: &Point, i: usize) -> Vec<f64> {
        self.check_dim(x);
        assert!(i < self.n, "position {i} out of range (n={})", self.n);
        let v = &x.values;
        let li = self.rotamer_counts[i];
        let mut g = self.block(self.a.as_slice(), i).to_vec();
        for &idx in &self.adjacency[i] {
            let b = &self.blocks[idx];
            if b.i == i {
                let xj = self.block(v, b.j);
                for (r, gr) in g.iter_mut().enumerate().take(li) {
                    let row = &b.data[r * b.cols..(r + 1) * b.cols];
                    *gr += row.iter().zip(xj).map(|(brs, xs)| brs * xs).sum::<f64>();
                }
            } else {
                let xi = self.block(v, b.i);
                for (r, &xr) in xi.iter().enumerate() {
                    if xr == 0.0 {
                        continue;
                    }
                    let row = &b.data[r * b.cols..(r + 1) * b.cols];
                    for (s, brs) in row.iter().enumerate() {
                        g[s] += brs * xr;
                    }
                }
            }
        }
        g
    }

    /// Thresholded support and per-block argmax profile of `x`.
    pub fn support(&self, x: &Point, eps: f64) -> SupportSet {
        self.check_dim(x);
        assert!(eps >= 0.0, "eps must be non-negative");
        let v = &x.values;
        let mut per_position = Vec::with_capacity(self.n);
        let mut gamma = Vec::new();
        let mut argmax = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let off = self.block_offsets[i];
            let xi = self.block(v, i);
            let mut local = Vec::new();
            let mut max = f64::NEG_INFINITY;
            for (r, &xr) in xi.iter().enumerate() {
                if xr > eps {
                    local.push(r);
                    gamma.push(off + r);
                }
                if xr > max {
                    max = xr;
                }
            }
            // ties within eps of the block max are all recorded
            let ties: Vec<usize> = xi
                .iter()
                .enumerate()
                .filter(|(_, &xr)| xr >= max - eps)
                .map(|(r, _)| r)
                .collect();
            per_position.push(local);
            argmax.push(ties);
        }
        SupportSet {
            per_position,
            gamma,
            argmax,
        }
    }

    /// Simplex residuals `r_i` and the most negative entry of `x`.
    pub fn feasibility(&self, x: &Point) -> Feasibility {
        self.check_dim(x);
        let v = &x.values;
        let residuals = (0..self.n)
            .map(|i| self.block(v, i).iter().sum::<f64>() - 1.0)
            .collect();
        let min_entry = v.iter().fold(0.0f64, |acc, &x| acc.min(x));
        Feasibility { residuals, min_entry }
    }

    /// Binary point corresponding to an assignment.
    pub fn embed(&self, asg: &Assignment) -> Point {
        assert_eq!(asg.len(), self.n, "assignment length mismatch");
        let mut x = Point::zeros(self.m);
        for (i, &r) in asg.choices.iter().enumerate() {
            x.values[self.block_offsets[i] + r] = 1.0;
        }
        x
    }
}
