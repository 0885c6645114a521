//! NSGA-II over continuous station placements.
//!
//! A genome is `k_new` points; each point contributes a latitude and a
//! longitude coordinate to the real-valued operators. All objectives are
//! minimized.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::criteria::{BoundingBox, Criterion, PlacementProblem, Region};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

/// Genome coordinates closer than this are treated as the same placement.
pub const DEDUP_TOLERANCE: f64 = 1e-9;
const RESAMPLE_ATTEMPTS: usize = 100;
const BISECTION_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-coordinate mutation probability; `1 / (2 * k_new)` when absent.
    pub mutation_prob: Option<f64>,
    pub eta_c: f64,
    pub eta_m: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 100,
            generations: 200,
            crossover_prob: 0.9,
            mutation_prob: None,
            eta_c: 15.0,
            eta_m: 20.0,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 || !self.population_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "population size must be even and at least 4, got {}",
                self.population_size
            )));
        }
        if self.generations == 0 {
            return Err(Error::invalid("generations must be at least 1"));
        }
        let probs = [Some(self.crossover_prob), self.mutation_prob];
        if probs.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("probabilities must lie in [0, 1]"));
        }
        if !(self.eta_c.is_finite() && self.eta_c >= 0.0 && self.eta_m.is_finite() && self.eta_m >= 0.0) {
            return Err(Error::invalid("distribution indices must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn mutation_prob_for(&self, k_new: usize) -> f64 {
        self.mutation_prob.unwrap_or(1.0 / (2.0 * k_new.max(1) as f64))
    }
}

/// `a` dominates `b`: no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Fast non-dominated sort. Fronts are returned best first, each sorted by
/// index.
pub fn non_dominated_sort(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&points[i], &points[j]) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance within one front. Boundary points are infinite and an
/// objective with zero range adds nothing.
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].len();
    let mut dist = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for obj in 0..m {
        order.sort_by(|&a, &b| front[a][obj].total_cmp(&front[b][obj]).then(a.cmp(&b)));
        let lo = front[order[0]][obj];
        let hi = front[order[n - 1]][obj];
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        for w in 1..n - 1 {
            let i = order[w];
            if dist[i].is_finite() {
                dist[i] += (front[order[w + 1]][obj] - front[order[w - 1]][obj]) / range;
            }
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Vec<GeoPoint>,
    pub objectives: Vec<f64>,
    pub rank: usize,
    pub crowding: f64,
}

/// Binary tournament: lower rank, then larger crowding distance, then the
/// first drawn.
pub fn tournament_select<'p, R: Rng + ?Sized>(population: &'p [Individual], rng: &mut R) -> Result<&'p Individual> {
    if population.len() < 2 {
        return Err(Error::invalid("tournament needs at least 2 individuals"));
    }
    let a = &population[rng.gen_range(0..population.len())];
    let b = &population[rng.gen_range(0..population.len())];
    Ok(if b.rank < a.rank || (b.rank == a.rank && b.crowding > a.crowding) { b } else { a })
}

fn sbx_pair<R: Rng + ?Sized>(x1: f64, x2: f64, lo: f64, hi: f64, eta: f64, rng: &mut R) -> (f64, f64) {
    if (x1 - x2).abs() <= 1e-14 || hi <= lo {
        return (x1, x2);
    }
    let (y1, y2) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
    let u: f64 = rng.gen();
    let spread = |beta: f64| {
        let alpha = 2.0 - beta.powf(-(eta + 1.0));
        if u <= 1.0 / alpha {
            (u * alpha).powf(1.0 / (eta + 1.0))
        } else {
            (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
        }
    };
    let bq1 = spread(1.0 + 2.0 * (y1 - lo) / (y2 - y1));
    let bq2 = spread(1.0 + 2.0 * (hi - y2) / (y2 - y1));
    let c1 = (0.5 * ((y1 + y2) - bq1 * (y2 - y1))).clamp(lo, hi);
    let c2 = (0.5 * ((y1 + y2) + bq2 * (y2 - y1))).clamp(lo, hi);
    if x1 < x2 {
        (c1, c2)
    } else {
        (c2, c1)
    }
}

fn polynomial_mutation<R: Rng + ?Sized>(y: f64, lo: f64, hi: f64, eta: f64, rng: &mut R) -> f64 {
    if hi <= lo {
        return y;
    }
    let span = hi - lo;
    let d1 = (y - lo) / span;
    let d2 = (hi - y) / span;
    let u: f64 = rng.gen();
    let pow = 1.0 / (eta + 1.0);
    let dq = if u < 0.5 {
        let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
        val.powf(pow) - 1.0
    } else {
        let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
        1.0 - val.powf(pow)
    };
    (y + dq * span).clamp(lo, hi)
}

fn coord_bounds(b: &BoundingBox, coord: usize) -> (f64, f64) {
    if coord.is_multiple_of(2) {
        (b.south, b.north)
    } else {
        (b.west, b.east)
    }
}

fn flatten(genome: &[GeoPoint]) -> Vec<f64> {
    genome.iter().flat_map(|p| [p.lat, p.lng]).collect()
}

fn unflatten(coords: &[f64]) -> Vec<GeoPoint> {
    coords.chunks_exact(2).map(|c| GeoPoint { lat: c[0], lng: c[1] }).collect()
}

fn sample_in_bbox<R: Rng + ?Sized>(b: &BoundingBox, rng: &mut R) -> GeoPoint {
    GeoPoint { lat: rng.gen_range(b.south..=b.north), lng: rng.gen_range(b.west..=b.east) }
}

/// Uniform point in the region by rejection from its bounding box, falling
/// back to the anchor.
pub fn sample_in_area<R: Rng + ?Sized>(region: &Region, rng: &mut R) -> GeoPoint {
    let b = region.bbox();
    for _ in 0..10 * RESAMPLE_ATTEMPTS {
        let p = sample_in_bbox(&b, rng);
        if region.contains(p) {
            return p;
        }
    }
    region.anchor()
}

/// Brings an offspring point back inside the region: clamp to the bounding
/// box, then resample, then bisect along the segment to the anchor.
fn repair<R: Rng + ?Sized>(p: GeoPoint, region: &Region, rng: &mut R) -> GeoPoint {
    let b = region.bbox();
    let p = b.clamp(p);
    if region.contains(p) {
        return p;
    }
    for _ in 0..RESAMPLE_ATTEMPTS {
        let q = sample_in_bbox(&b, rng);
        if region.contains(q) {
            return q;
        }
    }
    let anchor = region.anchor();
    let lerp = |t: f64| GeoPoint { lat: p.lat + (anchor.lat - p.lat) * t, lng: p.lng + (anchor.lng - p.lng) * t };
    let (mut outside, mut inside) = (0.0, 1.0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (outside + inside);
        if region.contains(lerp(mid)) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    let q = lerp(inside);
    if region.contains(q) {
        q
    } else {
        anchor
    }
}

/// SBX followed by polynomial mutation, coordinate by coordinate, with the
/// children repaired into the region.
pub fn crossover_mutate<R: Rng + ?Sized>(
    a: &[GeoPoint],
    b: &[GeoPoint],
    cfg: &GaConfig,
    region: &Region,
    rng: &mut R,
) -> (Vec<GeoPoint>, Vec<GeoPoint>) {
    let bbox = region.bbox();
    let p_m = cfg.mutation_prob_for(a.len());
    let mut x = flatten(a);
    let mut y = flatten(b);
    for i in 0..x.len() {
        let (lo, hi) = coord_bounds(&bbox, i);
        if rng.gen::<f64>() < cfg.crossover_prob {
            (x[i], y[i]) = sbx_pair(x[i], y[i], lo, hi, cfg.eta_c, rng);
        }
    }
    for child in [&mut x, &mut y] {
        for (i, v) in child.iter_mut().enumerate() {
            if rng.gen::<f64>() < p_m {
                let (lo, hi) = coord_bounds(&bbox, i);
                *v = polynomial_mutation(*v, lo, hi, cfg.eta_m, rng);
            }
        }
    }
    let fix = |g: Vec<GeoPoint>, rng: &mut R| g.into_iter().map(|p| repair(p, region, rng)).collect();
    let ca = fix(unflatten(&x), rng);
    let cb = fix(unflatten(&y), rng);
    (ca, cb)
}

/// Assigns rank and crowding distance to every individual.
fn assign_rank_crowding(pop: &mut [Individual]) {
    let objs: Vec<Vec<f64>> = pop.iter().map(|i| i.objectives.clone()).collect();
    for (rank, front) in non_dominated_sort(&objs).into_iter().enumerate() {
        let vecs: Vec<Vec<f64>> = front.iter().map(|&i| objs[i].clone()).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&vecs)) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
}

/// Keeps the best `size` individuals by front, breaking the last front by
/// descending crowding distance.
pub fn environmental_selection(merged: Vec<Individual>, size: usize) -> Vec<Individual> {
    let objs: Vec<Vec<f64>> = merged.iter().map(|i| i.objectives.clone()).collect();
    let mut keep: Vec<usize> = Vec::with_capacity(size);
    for front in non_dominated_sort(&objs) {
        if keep.len() + front.len() <= size {
            keep.extend(&front);
            if keep.len() == size {
                break;
            }
            continue;
        }
        let vecs: Vec<Vec<f64>> = front.iter().map(|&i| objs[i].clone()).collect();
        let d = crowding_distance(&vecs);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
        keep.extend(order.into_iter().take(size - keep.len()).map(|w| front[w]));
        break;
    }
    let mut slots: Vec<Option<Individual>> = merged.into_iter().map(Some).collect();
    let mut next: Vec<Individual> = keep.into_iter().map(|i| slots[i].take().expect("unique index")).collect();
    assign_rank_crowding(&mut next);
    next
}

fn evaluate_all(problem: &PlacementProblem, genomes: Vec<Vec<GeoPoint>>) -> Result<Vec<Individual>> {
    genomes
        .into_par_iter()
        .map(|genome| {
            let objectives = problem.evaluate(&genome)?;
            Ok(Individual { genome, objectives, rank: 0, crowding: 0.0 })
        })
        .collect()
}

/// Generation-by-generation driver. Construction creates and evaluates the
/// initial population.
pub struct Nsga2<'a> {
    problem: &'a PlacementProblem,
    cfg: GaConfig,
    rng: ChaCha8Rng,
    population: Vec<Individual>,
    generation: usize,
}

impl<'a> Nsga2<'a> {
    pub fn new(problem: &'a PlacementProblem, cfg: GaConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let genomes: Vec<Vec<GeoPoint>> = (0..cfg.population_size)
            .map(|_| (0..problem.k_new).map(|_| sample_in_area(&problem.region, &mut rng)).collect())
            .collect();
        let mut population = evaluate_all(problem, genomes)?;
        assign_rank_crowding(&mut population);
        Ok(Nsga2 { problem, cfg, rng, population, generation: 0 })
    }

    pub fn population(&self) -> &[Individual] {
        &self.population
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn step(&mut self) -> Result<()> {
        let p = self.cfg.population_size;
        let mut children = Vec::with_capacity(p);
        while children.len() < p {
            let a = tournament_select(&self.population, &mut self.rng)?;
            let b = tournament_select(&self.population, &mut self.rng)?;
            let (ca, cb) = crossover_mutate(&a.genome, &b.genome, &self.cfg, &self.problem.region, &mut self.rng);
            children.push(ca);
            children.push(cb);
        }
        let offspring = evaluate_all(self.problem, children)?;
        let mut merged = std::mem::take(&mut self.population);
        merged.extend(offspring);
        self.population = environmental_selection(merged, p);
        self.generation += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<ParetoResult> {
        let mut front: Vec<&Individual> = Vec::new();
        for ind in self.population.iter().filter(|i| i.rank == 0) {
            let dup = front.iter().any(|f| {
                f.genome.iter().zip(&ind.genome).all(|(a, b)| {
                    (a.lat - b.lat).abs() <= DEDUP_TOLERANCE && (a.lng - b.lng).abs() <= DEDUP_TOLERANCE
                })
            });
            if !dup {
                front.push(ind);
            }
        }
        front.sort_by(|a, b| {
            a.objectives
                .iter()
                .zip(&b.objectives)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        });
        ParetoResult::build(self.problem, &self.cfg, self.generation, &front)
    }
}

/// Runs the full generation budget.
pub fn run(problem: &PlacementProblem, cfg: &GaConfig) -> Result<ParetoResult> {
    run_with_progress(problem, cfg, |_, _| {})
}

/// Like [`run`], calling `progress(done, total)` after every generation.
pub fn run_with_progress(
    problem: &PlacementProblem,
    cfg: &GaConfig,
    mut progress: impl FnMut(usize, usize),
) -> Result<ParetoResult> {
    let mut ga = Nsga2::new(problem, *cfg)?;
    for g in 0..cfg.generations {
        ga.step()?;
        progress(g + 1, cfg.generations);
    }
    ga.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CorrelationMatrix {
    pub criteria: Vec<Criterion>,
    pub matrix: Vec<Vec<f64>>,
    /// Criteria whose values did not vary; their off-diagonal entries are 0.
    pub zero_variance: Vec<Criterion>,
}

/// Pearson correlation between objective columns.
///
/// Returns the matrix and the indices of zero-variance columns.
pub fn objective_correlations(vectors: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if vectors.len() < 2 {
        return Err(Error::TooFewSolutions(vectors.len()));
    }
    let m = vectors[0].len();
    if vectors.iter().any(|v| v.len() != m) {
        return Err(Error::ShapeMismatch(format!("objective vectors must all have length {m}")));
    }
    let n = vectors.len() as f64;
    let centered: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mean = vectors.iter().map(|v| v[j]).sum::<f64>() / n;
            vectors.iter().map(|v| v[j] - mean).collect()
        })
        .collect();
    let ss: Vec<f64> = centered.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
    let zero: Vec<usize> = (0..m).filter(|&j| ss[j] == 0.0).collect();
    let mut r = vec![vec![0.0; m]; m];
    for i in 0..m {
        r[i][i] = 1.0;
        for j in i + 1..m {
            let v = if ss[i] == 0.0 || ss[j] == 0.0 {
                0.0
            } else {
                let cov: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                (cov / (ss[i] * ss[j]).sqrt()).clamp(-1.0, 1.0)
            };
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok((r, zero))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ParetoSolution {
    pub id: String,
    pub genome: Vec<GeoPoint>,
    pub objectives: BTreeMap<Criterion, f64>,
    /// Min-max over the returned solutions, inverted so 1 is best.
    pub normalized_objectives: BTreeMap<Criterion, f64>,
    /// `None` stands for an unbounded crowding distance.
    pub crowding_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ParetoResult {
    pub criteria: Vec<Criterion>,
    pub k_new: usize,
    pub seed: u64,
    pub config: GaConfig,
    pub generations_run: usize,
    pub solutions: Vec<ParetoSolution>,
    /// Absent when fewer than two solutions were found.
    pub correlation: Option<CorrelationMatrix>,
}

impl ParetoResult {
    fn build(problem: &PlacementProblem, cfg: &GaConfig, generations_run: usize, front: &[&Individual]) -> Result<Self> {
        let criteria = problem.criteria.clone();
        let m = criteria.len();
        let vectors: Vec<Vec<f64>> = front.iter().map(|i| i.objectives.clone()).collect();
        let crowd = crowding_distance(&vectors);
        let (lo, hi): (Vec<f64>, Vec<f64>) = (0..m)
            .map(|j| {
                vectors
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v[j]), b.max(v[j])))
            })
            .unzip();
        let solutions = front
            .iter()
            .zip(&crowd)
            .enumerate()
            .map(|(idx, (ind, d))| {
                let objectives = criteria.iter().copied().zip(ind.objectives.iter().copied()).collect();
                let normalized_objectives = criteria
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| {
                        let range = hi[j] - lo[j];
                        let v = if range > 0.0 { (hi[j] - ind.objectives[j]) / range } else { 1.0 };
                        (c, v)
                    })
                    .collect();
                ParetoSolution {
                    id: format!("sol-{idx}"),
                    genome: ind.genome.clone(),
                    objectives,
                    normalized_objectives,
                    crowding_distance: d.is_finite().then_some(*d),
                }
            })
            .collect();
        let correlation = match objective_correlations(&vectors) {
            Ok((matrix, zero)) => Some(CorrelationMatrix {
                criteria: criteria.clone(),
                matrix,
                zero_variance: zero.into_iter().map(|j| criteria[j]).collect(),
            }),
            Err(Error::TooFewSolutions(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(ParetoResult {
            criteria,
            k_new: problem.k_new,
            seed: cfg.seed,
            config: *cfg,
            generations_run,
            solutions,
            correlation,
        })
    }

    /// Objective vectors in criteria order.
    pub fn objective_vectors(&self) -> Vec<Vec<f64>> {
        self.solutions.iter().map(|s| self.criteria.iter().map(|c| s.objectives[c]).collect()).collect()
    }
}
