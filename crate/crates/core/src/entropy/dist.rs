use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::Serialize;

use crate::numeric::csum;
use crate::{Error, Result};

/// Tolerance on the total mass of a pmf and on channel row sums.
pub const MASS_TOL: f64 = 1e-12;

/// Uniform grid `lo, lo + step, …, hi` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidGrid(format!("need finite lo < hi, got {lo}..{hi}")));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n}")));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    /// `lo:hi:n`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidGrid(format!("expected lo:hi:n, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].trim().parse().map_err(|_| bad())?;
        let hi = parts[1].trim().parse().map_err(|_| bad())?;
        let n = parts[2].trim().parse().map_err(|_| bad())?;
        Self::new(lo, hi, n)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.n)
    }
}

/// A labelling of support cells into blocks, numbered by first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    block_of: Vec<usize>,
    blocks: usize,
}

impl Partition {
    /// One block holding every cell.
    pub fn trivial(cells: usize) -> Self {
        Self {
            block_of: vec![0; cells],
            blocks: usize::from(cells > 0),
        }
    }

    /// Every cell in its own block.
    pub fn discrete(cells: usize) -> Self {
        Self {
            block_of: (0..cells).collect(),
            blocks: cells,
        }
    }

    pub fn from_keys<K: Eq + Hash, I: IntoIterator<Item = K>>(keys: I) -> Self {
        let mut ids: HashMap<K, usize> = HashMap::new();
        let block_of = keys
            .into_iter()
            .map(|k| {
                let next = ids.len();
                *ids.entry(k).or_insert(next)
            })
            .collect();
        Self {
            block_of,
            blocks: ids.len(),
        }
    }

    /// The common refinement.
    pub fn join(&self, other: &Partition) -> Self {
        assert_eq!(self.len(), other.len(), "partitions over different cell sets");
        Self::from_keys(self.block_of.iter().zip(&other.block_of))
    }

    pub fn len(&self) -> usize {
        self.block_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block_of.is_empty()
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn block_of(&self, cell: usize) -> usize {
        self.block_of[cell]
    }

    pub fn labels(&self) -> &[usize] {
        &self.block_of
    }
}

/// A real value per joint outcome of `scope`, row-major with the first scope
/// variable outermost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomFunction {
    pub scope: Vec<String>,
    pub table: Vec<f64>,
}

impl RandomFunction {
    pub fn new(scope: Vec<String>, table: Vec<f64>) -> Result<Self> {
        for (i, v) in scope.iter().enumerate() {
            if scope[..i].contains(v) {
                return Err(Error::InvalidFunction(format!("variable `{v}` repeated in scope")));
            }
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFunction("table has non-finite entries".into()));
        }
        Ok(Self { scope, table })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            scope: Vec::new(),
            table: vec![c],
        }
    }

    /// Tabulates `g` over the outcomes of `scope` under `dist`'s alphabets.
    pub fn from_fn(
        dist: &JointDistribution,
        scope: &[&str],
        mut g: impl FnMut(&[usize]) -> f64,
    ) -> Result<Self> {
        let sizes = scope
            .iter()
            .map(|v| dist.var_index(v).map(|i| dist.sizes()[i]))
            .collect::<Result<Vec<_>>>()?;
        let total: usize = sizes.iter().product();
        let mut idx = vec![0usize; sizes.len()];
        let mut table = Vec::with_capacity(total);
        for _ in 0..total {
            table.push(g(&idx));
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < sizes[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self::new(scope.iter().map(|s| s.to_string()).collect(), table)
    }
}

/// A pmf over named finite alphabets, stored sparsely as its support cells in
/// lexicographic order (first variable outermost).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    vars: Vec<String>,
    sizes: Vec<usize>,
    cells: Vec<u32>,
    probs: Vec<f64>,
}

fn check_header(vars: &[String], sizes: &[usize]) -> Result<()> {
    if vars.len() != sizes.len() {
        return Err(Error::InvalidDistribution(format!(
            "{} variable names but {} sizes",
            vars.len(),
            sizes.len()
        )));
    }
    for (i, v) in vars.iter().enumerate() {
        if v.is_empty() {
            return Err(Error::InvalidDistribution("empty variable name".into()));
        }
        if vars[..i].contains(v) {
            return Err(Error::InvalidDistribution(format!("variable `{v}` repeated")));
        }
    }
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::InvalidDistribution(format!(
            "variable `{}` has an empty alphabet",
            vars[i]
        )));
    }
    Ok(())
}

fn check_mass(total: f64) -> Result<()> {
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidDistribution(format!(
            "pmf sums to {total:.17}, not 1 within {MASS_TOL:e}"
        )));
    }
    Ok(())
}

impl JointDistribution {
    /// From a dense row-major pmf.
    pub fn new(vars: Vec<String>, sizes: Vec<usize>, pmf: &[f64]) -> Result<Self> {
        check_header(&vars, &sizes)?;
        let total: usize = sizes.iter().product();
        if pmf.len() != total {
            return Err(Error::InvalidDistribution(format!(
                "pmf has {} entries, alphabets need {total}",
                pmf.len()
            )));
        }
        if let Some(p) = pmf.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
        }
        check_mass(csum(pmf.iter().copied()))?;
        let mut cells = Vec::new();
        let mut probs = Vec::new();
        let mut idx = vec![0u32; sizes.len()];
        for &p in pmf {
            if p > 0.0 {
                cells.extend_from_slice(&idx);
                probs.push(p);
            }
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if (idx[k] as usize) < sizes[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Self {
            vars,
            sizes,
            cells,
            probs,
        })
    }

    /// From (outcome, mass) pairs; repeated outcomes are merged, zeros dropped.
    pub fn from_cells<I>(vars: Vec<String>, sizes: Vec<usize>, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        let (dist, total) = Self::accumulate(vars, sizes, cells)?;
        check_mass(total)?;
        Ok(dist)
    }

    /// Like [`from_cells`](Self::from_cells) but rescales to unit mass and
    /// returns the mass before rescaling.
    pub fn from_cells_normalized<I>(vars: Vec<String>, sizes: Vec<usize>, cells: I) -> Result<(Self, f64)>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        let (mut dist, total) = Self::accumulate(vars, sizes, cells)?;
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("zero total mass".into()));
        }
        if total != 1.0 {
            for p in &mut dist.probs {
                *p /= total;
            }
        }
        Ok((dist, total))
    }

    fn accumulate<I>(vars: Vec<String>, sizes: Vec<usize>, cells: I) -> Result<(Self, f64)>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        check_header(&vars, &sizes)?;
        let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (cell, p) in cells {
            if cell.len() != sizes.len() || cell.iter().zip(&sizes).any(|(c, s)| c >= s) {
                return Err(Error::InvalidDistribution(format!(
                    "outcome {cell:?} outside alphabets {sizes:?}"
                )));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
            }
            if p > 0.0 {
                *acc.entry(cell.iter().map(|&c| c as u32).collect()).or_insert(0.0) += p;
            }
        }
        let total = csum(acc.values().copied());
        let mut flat = Vec::with_capacity(acc.len() * sizes.len());
        let mut probs = Vec::with_capacity(acc.len());
        for (cell, p) in acc {
            flat.extend(cell);
            probs.push(p);
        }
        Ok((
            Self {
                vars,
                sizes,
                cells: flat,
                probs,
            },
            total,
        ))
    }

    pub fn uniform(vars: Vec<String>, sizes: Vec<usize>) -> Result<Self> {
        check_header(&vars, &sizes)?;
        let total: usize = sizes.iter().product();
        Self::new(vars, sizes, &vec![1.0 / total as f64; total])
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of support cells.
    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cell(&self, i: usize) -> &[u32] {
        let k = self.vars.len();
        &self.cells[i * k..(i + 1) * k]
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn var_indices<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.var_index(n.as_ref())).collect()
    }

    /// `X=0,Y=1` style label of a support cell.
    pub fn outcome_label(&self, i: usize) -> String {
        self.vars
            .iter()
            .zip(self.cell(i))
            .map(|(v, c)| format!("{v}={c}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Blocks of support cells sharing the values of `vars` (indices).
    pub fn partition(&self, vars: &[usize]) -> Partition {
        if vars.is_empty() {
            return Partition::trivial(self.support_len());
        }
        Partition::from_keys((0..self.support_len()).map(|i| {
            let c = self.cell(i);
            vars.iter().map(|&v| c[v]).collect::<Vec<u32>>()
        }))
    }

    pub fn partition_by<S: AsRef<str>>(&self, names: &[S]) -> Result<Partition> {
        Ok(self.partition(&self.var_indices(names)?))
    }

    /// Row-major flat index of a support cell restricted to `vars`.
    pub fn sub_index(&self, i: usize, vars: &[usize]) -> usize {
        let c = self.cell(i);
        vars.iter()
            .fold(0usize, |acc, &v| acc * self.sizes[v] + c[v] as usize)
    }

    pub fn marginal<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx = self.var_indices(names)?;
        let vars = idx.iter().map(|&i| self.vars[i].clone()).collect();
        let sizes = idx.iter().map(|&i| self.sizes[i]).collect();
        let cells = (0..self.support_len()).map(|i| {
            let c = self.cell(i);
            (idx.iter().map(|&v| c[v] as usize).collect(), self.probs[i])
        });
        let (dist, _) = Self::accumulate(vars, sizes, cells)?;
        Ok(dist)
    }

    /// Dense row-major pmf.
    pub fn dense(&self) -> Vec<f64> {
        let all: Vec<usize> = (0..self.vars.len()).collect();
        let mut out = vec![0.0; self.sizes.iter().product()];
        for i in 0..self.support_len() {
            out[self.sub_index(i, &all)] += self.probs[i];
        }
        out
    }

    /// Independent product; variable names must be disjoint.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if let Some(v) = other.vars.iter().find(|v| self.vars.contains(v)) {
            return Err(Error::InvalidDistribution(format!("variable `{v}` in both factors")));
        }
        let mut vars = self.vars.clone();
        vars.extend(other.vars.iter().cloned());
        let mut sizes = self.sizes.clone();
        sizes.extend_from_slice(&other.sizes);
        let mut cells = Vec::with_capacity(self.support_len() * other.support_len());
        for i in 0..self.support_len() {
            for j in 0..other.support_len() {
                let c: Vec<usize> = self
                    .cell(i)
                    .iter()
                    .chain(other.cell(j))
                    .map(|&x| x as usize)
                    .collect();
                cells.push((c, self.probs[i] * other.probs[j]));
            }
        }
        let (dist, _) = Self::accumulate(vars, sizes, cells)?;
        Ok(dist)
    }

    /// Appends a variable `name` drawn from `rows[src outcome]`, where the
    /// source outcome is the row-major index over `srcs`.
    pub fn with_channel<S: AsRef<str>>(
        &self,
        srcs: &[S],
        name: &str,
        out_size: usize,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        let src = self.var_indices(srcs)?;
        let in_size: usize = src.iter().map(|&i| self.sizes[i]).product();
        validate_channel(rows, in_size, out_size)?;
        let mut vars = self.vars.clone();
        vars.push(name.to_string());
        let mut sizes = self.sizes.clone();
        sizes.push(out_size);
        let mut cells = Vec::new();
        for i in 0..self.support_len() {
            let row = &rows[self.sub_index(i, &src)];
            for (o, &q) in row.iter().enumerate() {
                let mut c: Vec<usize> = self.cell(i).iter().map(|&x| x as usize).collect();
                c.push(o);
                cells.push((c, self.probs[i] * q));
            }
        }
        let (dist, _) = Self::accumulate(vars, sizes, cells)?;
        Ok(dist)
    }

    /// Per-support-cell values of `f`.
    pub fn evaluate(&self, f: &RandomFunction) -> Result<Vec<f64>> {
        let idx = self.var_indices(&f.scope)?;
        let expect: usize = idx.iter().map(|&i| self.sizes[i]).product();
        if f.table.len() != expect {
            return Err(Error::InvalidFunction(format!(
                "table over {:?} has {} entries, expected {expect}",
                f.scope,
                f.table.len()
            )));
        }
        Ok((0..self.support_len())
            .map(|i| f.table[self.sub_index(i, &idx)])
            .collect())
    }

    /// Total-variation distance to a pmf over the same alphabets.
    pub fn tv_distance(&self, other: &Self) -> Result<f64> {
        if self.vars != other.vars || self.sizes != other.sizes {
            return Err(Error::InvalidDistribution(
                "total variation needs identical variables and alphabets".into(),
            ));
        }
        let mut diff: BTreeMap<&[u32], f64> = BTreeMap::new();
        for i in 0..self.support_len() {
            *diff.entry(self.cell(i)).or_insert(0.0) += self.probs[i];
        }
        for j in 0..other.support_len() {
            *diff.entry(other.cell(j)).or_insert(0.0) -= other.probs[j];
        }
        Ok(0.5 * csum(diff.values().map(|d| d.abs())))
    }
}

/// Rows must be non-negative and sum to 1 within [`MASS_TOL`].
pub fn validate_channel(rows: &[Vec<f64>], in_size: usize, out_size: usize) -> Result<()> {
    if rows.len() != in_size {
        return Err(Error::InvalidChannel(format!(
            "{} rows for {in_size} source symbols",
            rows.len()
        )));
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != out_size {
            return Err(Error::InvalidChannel(format!(
                "row {r} has {} entries, expected {out_size}",
                row.len()
            )));
        }
        if row.iter().any(|q| !q.is_finite() || *q < 0.0) {
            return Err(Error::InvalidChannel(format!("row {r} has a negative entry")));
        }
        let s = csum(row.iter().copied());
        if (s - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidChannel(format!("row {r} sums to {s}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn grid_points_end_exactly() {
        let g: GridSpec = "0.01:10:200".parse().unwrap();
        let p = g.points();
        assert_eq!(p.len(), 200);
        assert_eq!(p[0], 0.01);
        assert_eq!(p[199], 10.0);
        assert!("1:1:3".parse::<GridSpec>().is_err());
        assert!("0:1:1".parse::<GridSpec>().is_err());
        assert!("0:1".parse::<GridSpec>().is_err());
    }

    #[test]
    fn sparse_support_and_marginal() {
        let d = JointDistribution::new(names(&["X", "Y"]), vec![2, 2], &[0.5, 0.0, 0.25, 0.25])
            .unwrap();
        assert_eq!(d.support_len(), 3);
        assert_eq!(d.cell(1), &[1, 0]);
        let m = d.marginal(&["Y"]).unwrap();
        assert_eq!(m.dense(), vec![0.75, 0.25]);
        assert_eq!(d.outcome_label(2), "X=1,Y=1");
    }

    #[test]
    fn rejects_bad_pmfs() {
        assert!(JointDistribution::new(names(&["X"]), vec![2], &[0.5, 0.6]).is_err());
        assert!(JointDistribution::new(names(&["X"]), vec![2], &[1.5, -0.5]).is_err());
        assert!(JointDistribution::new(names(&["X", "X"]), vec![1, 1], &[1.0]).is_err());
        assert!(JointDistribution::new(names(&["X"]), vec![3], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn from_cells_merges() {
        let d = JointDistribution::from_cells(
            names(&["A"]),
            vec![2],
            vec![(vec![1], 0.25), (vec![0], 0.5), (vec![1], 0.25)],
        )
        .unwrap();
        assert_eq!(d.dense(), vec![0.5, 0.5]);
    }

    #[test]
    fn channel_composition() {
        let d = JointDistribution::uniform(names(&["X"]), vec![2]).unwrap();
        let e = d
            .with_channel(&["X"], "Y", 2, &[vec![1.0, 0.0], vec![0.5, 0.5]])
            .unwrap();
        assert_eq!(e.dense(), vec![0.5, 0.0, 0.25, 0.25]);
        assert!(d.with_channel(&["X"], "Y", 2, &[vec![0.9, 0.0], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn partition_numbering_and_join() {
        let p = Partition::from_keys([3, 1, 3, 2]);
        assert_eq!(p.labels(), &[0, 1, 0, 2]);
        let q = Partition::from_keys([0, 0, 1, 1]);
        assert_eq!(p.join(&q).blocks(), 4);
        assert_eq!(Partition::trivial(4).blocks(), 1);
    }

    #[test]
    fn from_fn_row_major() {
        let d = JointDistribution::uniform(names(&["X", "Y"]), vec![2, 3]).unwrap();
        let f = RandomFunction::from_fn(&d, &["X", "Y"], |c| (c[0] * 10 + c[1]) as f64).unwrap();
        assert_eq!(f.table, vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        let vals = d.evaluate(&f).unwrap();
        assert_eq!(vals, f.table);
    }
}
