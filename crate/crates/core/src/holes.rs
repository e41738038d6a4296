//! Markov holes, interval holes and their classification.

use crate::error::{invalid, Error, Result};
use crate::induced::{BranchTable, InducedSystem};
use crate::map_core::{cylinder_realize, itinerary, parse_word, word_string, Branch, MapParams};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalHole {
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovHole {
    pub n0: usize,
    pub cells: Vec<String>,
    pub words: Vec<Vec<Branch>>,
    /// Realized intervals, sorted and merged.
    pub intervals: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hole {
    Markov(MarkovHole),
    Interval(IntervalHole),
}

/// How a hole word kills return blocks, in image coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum DeadRule {
    /// Branch `branch` dies when its image lies in `image`.
    Exact { branch: usize, image: (f64, f64) },
    /// Every branch n >= first dies on `image` (all of Y when `None`).
    From { first: usize, image: Option<(f64, f64)> },
}

/// Parses a cell id: an L/R word, `J<k>` (= L^k R) or `Y<k>` (= R L^k R).
pub fn parse_cell(s: &str) -> Result<Vec<Branch>> {
    let s = s.trim();
    let num = |rest: &str| rest.parse::<usize>().map_err(|_| invalid!("bad cell id {s:?}"));
    if let Some(rest) = s.strip_prefix('J') {
        let k = num(rest)?;
        if k == 0 {
            return Err(invalid!("J cells start at J1"));
        }
        let mut w = vec![Branch::L; k];
        w.push(Branch::R);
        return Ok(w);
    }
    if let Some(rest) = s.strip_prefix('Y') {
        let k = num(rest)?;
        let mut w = vec![Branch::R];
        w.extend(std::iter::repeat(Branch::L).take(k));
        w.push(Branch::R);
        return Ok(w);
    }
    let w = parse_word(s)?;
    if w.is_empty() {
        return Err(invalid!("empty cell id"));
    }
    Ok(w)
}

fn merge(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in v {
        if let Some(last) = out.last_mut() {
            if a <= last.1 + 1e-15 {
                last.1 = last.1.max(b);
                continue;
            }
        }
        out.push((a, b));
    }
    out
}

fn is_renewal_token(w: &[Branch]) -> bool {
    let k = w.iter().take_while(|b| **b == Branch::L).count();
    if k > 0 && k + 1 == w.len() && w[k] == Branch::R {
        return true;
    }
    if w.len() >= 2 && w[0] == Branch::R && w[w.len() - 1] == Branch::R {
        return w[1..w.len() - 1].iter().all(|b| *b == Branch::L);
    }
    false
}

pub fn build_markov_hole<S: AsRef<str>>(p: MapParams, n0: usize, cells: &[S]) -> Result<MarkovHole> {
    if n0 == 0 {
        return Err(invalid!("N0 must be positive"));
    }
    if cells.is_empty() {
        return Err(invalid!("a Markov hole needs at least one cell"));
    }
    let mut words = Vec::new();
    let mut names = Vec::new();
    let mut ivs = Vec::new();
    for c in cells {
        let w = parse_cell(c.as_ref())?;
        if w.len() > n0 && !is_renewal_token(&w) {
            return Err(invalid!(
                "cell {} has depth {} > N0 = {n0} and is not a renewal cell",
                c.as_ref(),
                w.len()
            ));
        }
        let cyl = cylinder_realize(p, &w)?;
        ivs.push((cyl.lo, cyl.hi));
        names.push(c.as_ref().trim().to_string());
        words.push(w);
    }
    let intervals = merge(ivs);
    let total: f64 = intervals.iter().map(|i| i.1 - i.0).sum();
    if total >= 1.0 - 1e-15 {
        return Err(invalid!("hole covers the whole interval"));
    }
    Ok(MarkovHole { n0, cells: names, words, intervals })
}

impl MarkovHole {
    /// True when some hole word is a prefix of `w`.
    pub fn catches(&self, w: &[Branch]) -> bool {
        self.words.iter().any(|h| h.len() <= w.len() && w[..h.len()] == h[..])
    }

    pub fn max_word_len(&self) -> usize {
        self.words.iter().map(|w| w.len()).max().unwrap_or(0)
    }

    pub fn contains_origin(&self) -> bool {
        self.words.iter().any(|w| w.iter().all(|b| *b == Branch::L))
    }

    pub fn dead_rules(&self, p: MapParams) -> Result<Vec<DeadRule>> {
        let mut rules = Vec::new();
        for w in &self.words {
            let image = |v: &[Branch]| -> Result<(f64, f64)> {
                let c = cylinder_realize(p, v)?;
                Ok((c.lo, c.hi))
            };
            if w[0] == Branch::R {
                let j = w[1..].iter().take_while(|b| **b == Branch::L).count();
                if 1 + j < w.len() {
                    rules.push(DeadRule::Exact { branch: j, image: image(&w[1 + j..])? });
                } else {
                    rules.push(DeadRule::From { first: j, image: None });
                }
            } else {
                let k = w.iter().take_while(|b| **b == Branch::L).count();
                if k < w.len() {
                    rules.push(DeadRule::From { first: k, image: Some(image(&w[k..])?) });
                } else {
                    rules.push(DeadRule::From { first: k, image: None });
                }
            }
        }
        Ok(rules)
    }

    /// Largest return index mentioned by the hole.
    pub fn max_index(&self, p: MapParams) -> usize {
        self.dead_rules(p)
            .map(|rs| {
                rs.iter()
                    .map(|r| match r {
                        DeadRule::Exact { branch, .. } => *branch,
                        DeadRule::From { first, .. } => *first,
                    })
                    .max()
                    .unwrap_or(0)
            })
            .unwrap_or(0)
    }

    /// Depth of the image cylinders that decide survival.
    pub fn image_depth(&self) -> usize {
        self.words
            .iter()
            .map(|w| {
                if w[0] == Branch::R {
                    let j = w[1..].iter().take_while(|b| **b == Branch::L).count();
                    w.len().saturating_sub(1 + j)
                } else {
                    let k = w.iter().take_while(|b| **b == Branch::L).count();
                    w.len() - k
                }
            })
            .max()
            .unwrap_or(1)
            .max(1)
    }
}

impl Hole {
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        match self {
            Hole::Markov(m) => m.intervals.clone(),
            Hole::Interval(iv) => vec![(iv.a, iv.b)],
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals().iter().any(|&(a, b)| x >= a && x < b)
    }

    pub fn measure(&self) -> f64 {
        self.intervals().iter().map(|i| i.1 - i.0).sum()
    }

    pub fn label(&self) -> String {
        match self {
            Hole::Markov(m) => format!("markov(N0={}; {})", m.n0, m.cells.join(",")),
            Hole::Interval(iv) => format!("interval({:.6},{:.6})", iv.a, iv.b),
        }
    }

    pub fn as_markov(&self) -> Option<&MarkovHole> {
        match self {
            Hole::Markov(m) => Some(m),
            _ => None,
        }
    }

    pub fn interval(a: f64, b: f64) -> Result<Hole> {
        if !(0.0 <= a && a < b && b <= 1.0) || (a <= 0.0 && b >= 1.0) {
            return Err(invalid!("interval hole ({a},{b}) must be a proper subinterval of [0,1]"));
        }
        Ok(Hole::Interval(IntervalHole { a, b }))
    }

    pub fn markov<S: AsRef<str>>(p: MapParams, n0: usize, cells: &[S]) -> Result<Hole> {
        Ok(Hole::Markov(build_markov_hole(p, n0, cells)?))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntervalHoleFamily {
    pub z: f64,
    pub epsilons: Vec<f64>,
    pub holes: Vec<Hole>,
}

/// Intervals of length eps around z, clipped to [0, 1].
pub fn interval_family(z: f64, epsilons: &[f64]) -> Result<IntervalHoleFamily> {
    if !(z > 0.0 && z <= 1.0) {
        return Err(invalid!("family centre must lie in (0,1], got {z}"));
    }
    if epsilons.is_empty() || epsilons.windows(2).any(|w| !(w[1] < w[0])) || epsilons.iter().any(|e| *e <= 0.0) {
        return Err(invalid!("epsilons must be positive and strictly decreasing"));
    }
    let mut holes = Vec::new();
    for &e in epsilons {
        let (mut a, mut b) = (z - 0.5 * e, z + 0.5 * e);
        if b > 1.0 {
            a -= b - 1.0;
            b = 1.0;
        }
        holes.push(Hole::interval(a.max(0.0), b)?);
    }
    Ok(IntervalHoleFamily { z, epsilons: epsilons.to_vec(), holes })
}

/// Nested D-cylinders of the given depths containing z. Every member is a Markov hole.
pub fn cylinder_family(p: MapParams, z: f64, depths: &[usize]) -> Result<Vec<Hole>> {
    if depths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid!("cylinder depths must increase"));
    }
    let deepest = depths.last().copied().unwrap_or(1);
    let it = itinerary(p, z, deepest);
    depths
        .iter()
        .map(|&d| Hole::markov(p, d, &[word_string(&it[..d])]))
        .collect()
}

#[derive(Debug, Deserialize, Serialize, Clone)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum HoleFile {
    Markov {
        #[serde(rename = "N0")]
        n0: usize,
        cells: Vec<String>,
    },
    Interval {
        z: f64,
        epsilons: Vec<f64>,
    },
    /// Extension: a list of Markov holes, used for nested families.
    MarkovFamily { members: Vec<MarkovMember> },
}

#[derive(Debug, Deserialize, Serialize, Clone)]
pub struct MarkovMember {
    #[serde(rename = "N0")]
    pub n0: usize,
    pub cells: Vec<String>,
}

impl HoleFile {
    pub fn parse(text: &str) -> Result<HoleFile> {
        serde_json::from_str(text).map_err(|e| invalid!("hole file: {e}"))
    }

    /// All holes described by the file, largest first for families.
    pub fn holes(&self, p: MapParams) -> Result<Vec<Hole>> {
        match self {
            HoleFile::Markov { n0, cells } => Ok(vec![Hole::markov(p, *n0, cells)?]),
            HoleFile::Interval { z, epsilons } => Ok(interval_family(*z, epsilons)?.holes),
            HoleFile::MarkovFamily { members } => {
                members.iter().map(|m| Hole::markov(p, m.n0, &m.cells)).collect()
            }
        }
    }

    /// Nominal size of each member: epsilon for interval families, Lebesgue length otherwise.
    pub fn sizes(&self, p: MapParams) -> Result<Vec<f64>> {
        match self {
            HoleFile::Interval { epsilons, .. } => Ok(epsilons.clone()),
            _ => Ok(self.holes(p)?.iter().map(|h| h.measure()).collect()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwallowCase {
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
    NonSwallowing,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SwallowingReport {
    pub case: SwallowCase,
    pub hole: (f64, f64),
    /// Forward-invariant pieces left of and right of the hole, when the hole splits I.
    pub components: Vec<(f64, f64)>,
    pub note: String,
}

impl SwallowingReport {
    /// Predicted log of the escape factor for the component that carries the
    /// annotated rate: -p(t) for case 2, -(p(t) + t log 2) for the right component of case 5.
    pub fn predicted_log_lambda(&self, p_t: f64, t: f64) -> Option<f64> {
        match self.case {
            SwallowCase::Case2 => Some(-p_t),
            SwallowCase::Case5 => Some(-(p_t + t * std::f64::consts::LN_2)),
            _ => None,
        }
    }
}

/// Classifies a single interval hole (a, b) among the swallowing cases.
pub fn classify_swallowing(p: MapParams, a: f64, b: f64) -> Result<SwallowingReport> {
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(invalid!("bad interval ({a},{b})"));
    }
    let tol = 1e-12;
    let hole = (a, b);
    let ren = crate::map_core::renewal_endpoints(p, 4000)?;
    let (case, components, note) = if a <= tol {
        (SwallowCase::Case1, vec![(b, 1.0)], "hole at the neutral fixed point; uniformly expanding away from it".to_string())
    } else if b >= 1.0 - tol && a <= 0.5 + tol {
        (SwallowCase::Case2, vec![(0.0, a)], "only the left branch survives; escape rate p(t)".to_string())
    } else if b <= 0.5 + tol && (1..ren.ell.len()).any(|k| a <= ren.ell[k] + tol && ren.ell[k - 1] <= b + tol) {
        (SwallowCase::Case3, vec![(0.0, a), (b, 1.0)], "hole contains a whole renewal cell left of 1/2".to_string())
    } else if (a - 0.5).abs() <= tol && b < 1.0 - tol {
        (SwallowCase::Case4, vec![(b, 1.0)], "hole (1/2, a) removes every long return".to_string())
    } else if a > 0.5 && b < 1.0 - tol && 2.0 * b - 1.0 >= a - tol {
        (
            SwallowCase::Case5,
            vec![(0.0, a), (b, 1.0)],
            "right component escapes at p(t) + t log 2; left component behaves like a non-swallowing hole".to_string(),
        )
    } else {
        (SwallowCase::NonSwallowing, vec![], "candidate non-swallowing hole".to_string())
    };
    Ok(SwallowingReport { case, hole, components, note })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    NonSwallowing,
    Swallowing,
    UniformlyHyperbolic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonSwallowingReport {
    pub transitive: bool,
    pub aperiodic: bool,
    pub condition2: bool,
    pub condition2_horizon: usize,
    pub period: u64,
    pub cells: usize,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

/// Builds the image-cell digraph of the open return map up to `horizon`
/// return indices and checks transitivity, aperiodicity and the tail condition
/// (`condition2`: return branches Y_n next to 1/2 beyond the hole's cells survive
/// with images of positive length).
pub fn check_non_swallowing(p: MapParams, hole: &Hole, horizon: usize) -> Result<NonSwallowingReport> {
    let n0 = match hole {
        Hole::Markov(m) => m.n0,
        Hole::Interval(_) => 1,
    };
    if horizon < n0 {
        return Err(invalid!("horizon {horizon} below N0 = {n0}"));
    }
    let origin = match hole {
        Hole::Markov(m) => m.contains_origin(),
        Hole::Interval(iv) => iv.a <= 0.0,
    };
    if origin {
        return Ok(NonSwallowingReport {
            transitive: false,
            aperiodic: false,
            condition2: false,
            condition2_horizon: horizon,
            period: 0,
            cells: 0,
            verdict: Verdict::UniformlyHyperbolic,
            warnings: vec!["uniformly hyperbolic case: hole contains the neutral fixed point".into()],
        });
    }
    let in_y: f64 = hole.intervals().iter().map(|&(a, b)| (b.min(1.0) - a.max(0.5)).max(0.0)).sum();
    if in_y >= 0.5 - 1e-15 {
        return Ok(NonSwallowingReport {
            transitive: false,
            aperiodic: false,
            condition2: false,
            condition2_horizon: horizon,
            period: 0,
            cells: 0,
            verdict: Verdict::Swallowing,
            warnings: vec!["hole contains [1/2, 1]: nothing returns".into()],
        });
    }
    let mut warnings = Vec::new();
    let n_h = match hole {
        Hole::Markov(m) => m.max_index(p),
        Hole::Interval(iv) => interval_max_index(p, iv),
    };
    let depth = horizon.max(n_h + 2).max(8);
    let table = Arc::new(BranchTable::build(p, depth)?);
    let sys = InducedSystem::with_table(table.clone(), Some(hole))?;
    if n_h >= horizon {
        warnings.push(format!("horizon {horizon} does not exceed the hole's largest return index {n_h}"));
    }

    // image cells
    let cuts: Vec<f64> = match hole {
        Hole::Markov(m) => {
            let d = m.image_depth();
            let mut c = vec![0.5, 1.0];
            for code in 0..(1usize << (d - 1)) {
                let mut w = vec![Branch::R];
                w.extend((0..d - 1).map(|i| if code >> i & 1 == 1 { Branch::R } else { Branch::L }));
                let cyl = cylinder_realize(p, &w)?;
                c.push(cyl.lo);
                c.push(cyl.hi);
            }
            sorted_unique(c)
        }
        Hole::Interval(_) => sys.breakpoints.clone(),
    };
    let ncell = cuts.len() - 1;
    let cell_of = |x: f64| -> usize { cuts.partition_point(|&c| c <= x).saturating_sub(1).min(ncell - 1) };

    let mut edges: Vec<(usize, usize, u64)> = Vec::new();
    let mut closed = true;
    for n in 0..=horizon.min(sys.n_max()) {
        for c in 0..ncell {
            let (lo, hi) = (cuts[c], cuts[c + 1]);
            let mid = 0.5 * (lo + hi);
            let dead_len = sys.dead[n].overlap(lo, hi);
            if dead_len > 1e-14 * (hi - lo) && dead_len < (hi - lo) * (1.0 - 1e-9) {
                closed = false;
            }
            if !sys.survives(n, mid) {
                continue;
            }
            let src = cell_of(table.xi(n, mid));
            if cell_of(table.xi(n, lo + 1e-12 * (hi - lo))) != cell_of(table.xi(n, hi - 1e-12 * (hi - lo))) {
                closed = false;
            }
            edges.push((src, c, (n + 1) as u64));
        }
    }
    if !closed {
        warnings.push("image partition is not closed under the return map at this horizon".into());
    }
    let mut is_node = vec![false; ncell];
    for e in &edges {
        is_node[e.1] = true;
    }
    let edges: Vec<(usize, usize, u64)> = edges.into_iter().filter(|e| is_node[e.0]).collect();
    let nodes: Vec<usize> = (0..ncell).filter(|&c| is_node[c]).collect();
    let (transitive, period) = if nodes.is_empty() {
        (false, 0)
    } else {
        strong_and_period(ncell, &nodes, &edges)
    };
    let aperiodic = period == 1;
    let mut condition2 = true;
    for n in (n_h + 1)..=horizon.min(sys.n_max()) {
        let live = 0.5 - sys.dead[n].overlap(0.5, 1.0);
        if live <= 1e-14 {
            condition2 = false;
            break;
        }
    }
    let verdict = if transitive && aperiodic && condition2 { Verdict::NonSwallowing } else { Verdict::Swallowing };
    Ok(NonSwallowingReport {
        transitive,
        aperiodic,
        condition2,
        condition2_horizon: horizon,
        period,
        cells: nodes.len(),
        verdict,
        warnings,
    })
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    v
}

fn interval_max_index(p: MapParams, iv: &IntervalHole) -> usize {
    let ren = match crate::map_core::renewal_endpoints(p, 20000) {
        Ok(r) => r,
        Err(_) => return 0,
    };
    let mut m = 0;
    for k in 1..ren.ell.len() {
        let (lo, hi) = ren.cell(k);
        let (ylo, yhi) = ren.y_cell(k);
        if (iv.a < hi && iv.b > lo) || (iv.a < yhi && iv.b > ylo) {
            m = k;
        }
    }
    m
}

/// Strong connectivity of the node set and the gcd of cycle lengths.
fn strong_and_period(ncell: usize, nodes: &[usize], edges: &[(usize, usize, u64)]) -> (bool, u64) {
    let mut fwd = vec![Vec::new(); ncell];
    let mut bwd = vec![Vec::new(); ncell];
    for &(a, b, l) in edges {
        fwd[a].push((b, l));
        bwd[b].push((a, l));
    }
    let root = nodes[0];
    let reach = |adj: &Vec<Vec<(usize, u64)>>| {
        let mut seen = vec![false; ncell];
        let mut q = VecDeque::from([root]);
        seen[root] = true;
        while let Some(u) = q.pop_front() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        seen
    };
    let f = reach(&fwd);
    let b = reach(&bwd);
    let strong = nodes.iter().all(|&n| f[n] && b[n]);
    // potentials along a BFS tree; every edge then contributes a cycle-length combination
    let mut pot: Vec<Option<i64>> = vec![None; ncell];
    pot[root] = Some(0);
    let mut q = VecDeque::from([root]);
    while let Some(u) = q.pop_front() {
        for &(v, l) in &fwd[u] {
            if pot[v].is_none() {
                pot[v] = Some(pot[u].unwrap() + l as i64);
                q.push_back(v);
            }
        }
    }
    let mut g: u64 = 0;
    for &(a, bb, l) in edges {
        if let (Some(pa), Some(pb)) = (pot[a], pot[bb]) {
            if b[a] && b[bb] {
                g = gcd(g, (pa + l as i64 - pb).unsigned_abs());
            }
        }
    }
    (strong, g)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionHReport {
    pub min_image: f64,
    pub argmin_member: usize,
    pub argmin_branches: (usize, usize),
    pub per_member: Vec<f64>,
    pub center_on_boundary: bool,
}

/// Smallest image length of the smoothness intervals of the twice-iterated
/// open return map, over a family of holes sharing the centre z. An empty
/// family member list entry `None` stands for the closed system.
pub fn check_assumption_h(p: MapParams, z: f64, family: &[Option<Hole>], n_max: usize) -> Result<AssumptionHReport> {
    let table = Arc::new(BranchTable::build(p, n_max)?);
    let ren = &table.renewal;
    let on_boundary = [0.0, 0.5, 1.0].iter().any(|e| (z - e).abs() < 1e-12)
        || (1..ren.ell.len()).any(|k| (z - ren.ell[k]).abs() < 1e-12 || (z - 0.5 * (1.0 + ren.ell[k])).abs() < 1e-12)
        || (z - 0.75).abs() < 1e-12;
    if on_boundary {
        return Ok(AssumptionHReport {
            min_image: 0.0,
            argmin_member: 0,
            argmin_branches: (0, 0),
            per_member: vec![0.0; family.len()],
            center_on_boundary: true,
        });
    }
    let mut best = (f64::INFINITY, 0usize, (0usize, 0usize));
    let mut per = Vec::new();
    for (idx, h) in family.iter().enumerate() {
        let sys = InducedSystem::with_table(table.clone(), h.as_ref())?;
        let pieces: Vec<Vec<(f64, f64)>> = (0..=n_max).map(|n| sys.dead[n].complement_in(0.5, 1.0)).collect();
        let mut m = (f64::INFINITY, (0, 0));
        // second-step branches fully inside a first-step image contribute their own pieces
        for (n2, ps) in pieces.iter().enumerate() {
            for &(a, b) in ps {
                if b - a < m.0 {
                    m = (b - a, (usize::MAX, n2));
                }
            }
        }
        // partial overlaps at the ends of first-step pieces
        for (n1, ps) in pieces.iter().enumerate() {
            for &(a, b) in ps {
                for e in [a, b] {
                    if e <= 0.5 || e >= 1.0 {
                        continue;
                    }
                    let Some(n2) = table.branch_at(e) else { continue };
                    let (ylo, yhi) = table.y_cell(n2);
                    let (lo, hi) = (a.max(ylo), b.min(yhi));
                    if hi <= lo {
                        continue;
                    }
                    let (ia, ib) = (table.forward(n2, lo), table.forward(n2, hi));
                    for &(pa, pb) in &pieces[n2] {
                        let len = pb.min(ib) - pa.max(ia);
                        if len > 0.0 && len < m.0 {
                            m = (len, (n1, n2));
                        }
                    }
                }
            }
        }
        per.push(m.0);
        if m.0 < best.0 {
            best = (m.0, idx, m.1);
        }
    }
    Ok(AssumptionHReport {
        min_image: best.0,
        argmin_member: best.1,
        argmin_branches: best.2,
        per_member: per,
        center_on_boundary: false,
    })
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Invalid(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> MapParams {
        MapParams::new(0.5).unwrap()
    }

    #[test]
    fn parse_cells() {
        assert_eq!(parse_cell("J2").unwrap(), vec![Branch::L, Branch::L, Branch::R]);
        assert_eq!(parse_cell("Y1").unwrap(), vec![Branch::R, Branch::L, Branch::R]);
        assert!(parse_cell("X1").is_err());
        assert!(parse_cell("J0").is_err());
    }

    #[test]
    fn right_half_hole() {
        let h = build_markov_hole(p(), 1, &["R"]).unwrap();
        assert_eq!(h.intervals, vec![(0.5, 1.0)]);
    }

    #[test]
    fn whole_space_rejected() {
        assert!(build_markov_hole(p(), 1, &["R", "L"]).is_err());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_swallowing(p(), 0.0, 0.1).unwrap().case, SwallowCase::Case1);
        assert_eq!(classify_swallowing(p(), 0.3, 1.0).unwrap().case, SwallowCase::Case2);
        assert_eq!(classify_swallowing(p(), 0.5, 0.6).unwrap().case, SwallowCase::Case4);
        assert_eq!(classify_swallowing(p(), 0.55, 0.6).unwrap().case, SwallowCase::NonSwallowing);
        assert_eq!(classify_swallowing(p(), 0.75, 0.875).unwrap().case, SwallowCase::Case5);
    }

    #[test]
    fn hole_file_parses() {
        let f = HoleFile::parse(r#"{"type":"markov","N0":3,"cells":["RRL"]}"#).unwrap();
        let hs = f.holes(p()).unwrap();
        assert_eq!(hs.len(), 1);
        let f = HoleFile::parse(r#"{"type":"interval","z":0.8,"epsilons":[0.1,0.05]}"#).unwrap();
        assert_eq!(f.holes(p()).unwrap().len(), 2);
        assert!(HoleFile::parse(r#"{"type":"interval","z":0.8,"epsilons":[0.05,0.1]}"#)
            .and_then(|f| f.holes(p()))
            .is_err());
    }
}
