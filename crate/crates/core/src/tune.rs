//! Genetic-algorithm search over random-forest hyper-parameters.
//!
//! Chromosomes are grid indices, so crossover and mutation are closed over
//! the search space by construction. Fitness is the mean macro F-score over
//! a stratified cross-validation, which stays honest under class imbalance
//! where plain accuracy does not.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::eval::macro_f_score;
use crate::forest::{train_forest, FeatureSubsample, HyperParams};
use crate::preprocess::NormalizationParams;
use crate::rng::{derive_rng, StreamId};
use crate::scalar::Scalar;
use crate::split::stratified_folds;

/// Number of tuned hyper-parameters (genes per chromosome).
pub const GENE_COUNT: usize = 4;

/// Ordered value grids, one per hyper-parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Grids {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_split: Vec<usize>,
    pub feature_subsample: Vec<FeatureSubsample>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            n_trees: vec![10, 25, 50, 100, 150, 200],
            max_depth: vec![Some(4), Some(8), Some(12), Some(16), Some(24), None],
            min_samples_split: vec![2, 5, 10, 20],
            feature_subsample: vec![
                FeatureSubsample::Sqrt,
                FeatureSubsample::Log2,
                FeatureSubsample::All,
            ],
        }
    }
}

impl Grids {
    pub fn lengths(&self) -> [usize; GENE_COUNT] {
        [
            self.n_trees.len(),
            self.max_depth.len(),
            self.min_samples_split.len(),
            self.feature_subsample.len(),
        ]
    }

    /// Total number of grid points.
    pub fn size(&self) -> usize {
        self.lengths().iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengths().contains(&0) {
            return Err(Error::InvalidInput("every hyper-parameter grid must be non-empty".into()));
        }
        Ok(())
    }

    /// Enumerates every chromosome of the grid, lexicographically.
    pub fn all_chromosomes(&self) -> Vec<Chromosome> {
        let lens = self.lengths();
        let mut out = Vec::with_capacity(self.size());
        for a in 0..lens[0] {
            for b in 0..lens[1] {
                for c in 0..lens[2] {
                    for d in 0..lens[3] {
                        out.push(Chromosome { genes: [a, b, c, d] });
                    }
                }
            }
        }
        out
    }
}

/// GA budget and operator rates.
#[derive(Clone, Debug, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub elitism_count: usize,
    pub cv_folds: usize,
    pub seed: u64,
    pub grids: Grids,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 20,
            generations: 10,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            tournament_size: 3,
            elitism_count: 1,
            cv_folds: 5,
            seed: 0,
            grids: Grids::default(),
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        self.grids.validate()?;
        let mut problems = Vec::new();
        if self.population_size == 0 {
            problems.push("population_size must be positive".to_string());
        }
        if self.generations == 0 {
            problems.push("generations must be positive".to_string());
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            problems.push(format!("crossover_rate must be in [0,1], got {}", self.crossover_rate));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            problems.push(format!("mutation_rate must be in [0,1], got {}", self.mutation_rate));
        }
        if self.tournament_size < 2 {
            problems.push("tournament_size must be >= 2".to_string());
        }
        if self.elitism_count >= self.population_size {
            problems.push(format!(
                "elitism_count {} must be below population_size {}",
                self.elitism_count, self.population_size
            ));
        }
        if self.cv_folds < 2 {
            problems.push("cv_folds must be >= 2".to_string());
        }
        match problems.len() {
            0 => Ok(()),
            _ => Err(Error::InvalidInput(problems.join("; "))),
        }
    }
}

/// A candidate solution: one index per hyper-parameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Chromosome {
    pub genes: [usize; GENE_COUNT],
}

impl Chromosome {
    pub fn decode(&self, grids: &Grids) -> HyperParams {
        HyperParams {
            n_trees: grids.n_trees[self.genes[0]],
            max_depth: grids.max_depth[self.genes[1]],
            min_samples_split: grids.min_samples_split[self.genes[2]],
            feature_subsample: grids.feature_subsample[self.genes[3]],
        }
    }

    fn random<R: Rng>(grids: &Grids, rng: &mut R) -> Chromosome {
        let lens = grids.lengths();
        Chromosome { genes: std::array::from_fn(|g| rng.random_range(0..lens[g])) }
    }

    pub fn in_bounds(&self, grids: &Grids) -> bool {
        self.genes.iter().zip(grids.lengths()).all(|(&g, len)| g < len)
    }
}

/// Search outcome: the decoded best chromosome and the per-generation
/// `(best_fitness, mean_fitness)` history.
#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub best: HyperParams,
    pub best_fitness: f64,
    pub history: Vec<(f64, f64)>,
}

impl TuneResult {
    /// Renders the history as `generation,best_f,mean_f` CSV.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("generation,best_f,mean_f\n");
        for (g, (best, mean)) in self.history.iter().enumerate() {
            out.push_str(&format!("{g},{best},{mean}\n"));
        }
        out
    }
}

/// Cross-validated fitness of one chromosome: mean macro F-score over
/// stratified folds. Fold `f` trains with forest seed `config.seed ^ f`.
/// Deterministic for fixed inputs.
pub fn fitness<T: Scalar>(
    chromosome: &Chromosome,
    dataset: &Dataset<T>,
    config: &GaConfig,
) -> Result<f64> {
    config.validate()?;
    if !chromosome.in_bounds(&config.grids) {
        return Err(Error::InvalidInput("chromosome out of grid bounds".into()));
    }
    let labels = dataset.labels_required()?;
    let counts = dataset.class_counts()?;
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::InvalidInput("fitness needs both classes present".into()));
    }
    if dataset.n_rows() < config.cv_folds {
        return Err(Error::InvalidInput(format!(
            "dataset has {} rows, fewer than {} folds",
            dataset.n_rows(),
            config.cv_folds
        )));
    }

    let params = chromosome.decode(&config.grids);
    let folds = stratified_folds(labels, config.cv_folds);
    let identity = NormalizationParams::identity(dataset.feature_names.clone());
    let mut total = 0.0;
    for fold in 0..config.cv_folds {
        let train_idx: Vec<usize> =
            (0..dataset.n_rows()).filter(|&i| folds[i] != fold).collect();
        let test_idx: Vec<usize> = (0..dataset.n_rows()).filter(|&i| folds[i] == fold).collect();
        let train = dataset.take_rows(&train_idx);
        let model =
            train_forest(&train, &params, identity.clone(), config.seed ^ fold as u64, 1)?;
        let truth: Vec<Label> = test_idx.iter().map(|&i| labels[i]).collect();
        let predicted: Vec<Label> = test_idx
            .iter()
            .map(|&i| model.predict(&dataset.rows[i]).map(|(label, _)| label))
            .collect::<Result<_>>()?;
        total += macro_f_score(&truth, &predicted);
    }
    Ok(total / config.cv_folds as f64)
}

/// Runs the GA against an arbitrary fitness function over the grids.
///
/// This is the engine behind [`evolve`]; tests drive it with stub fitness
/// landscapes. Fitness evaluations within a generation run in parallel and
/// are cached by gene vector, which changes neither the search trajectory
/// nor the result.
pub fn evolve_with<F>(config: &GaConfig, eval: F) -> Result<TuneResult>
where
    F: Fn(&Chromosome) -> Result<f64> + Sync,
{
    config.validate()?;
    let mut rng = derive_rng(config.seed, StreamId::GaInit, 0);
    let mut population: Vec<Chromosome> = (0..config.population_size)
        .map(|_| Chromosome::random(&config.grids, &mut rng))
        .collect();

    let mut cache: BTreeMap<Chromosome, f64> = BTreeMap::new();
    let mut history = Vec::with_capacity(config.generations);
    let mut best_ever: Option<(f64, Chromosome)> = None;

    for generation in 0..config.generations {
        let mut pending: Vec<Chromosome> = population
            .iter()
            .filter(|c| !cache.contains_key(c))
            .copied()
            .collect();
        pending.sort_unstable();
        pending.dedup();
        let evaluated: Vec<(Chromosome, f64)> = pending
            .par_iter()
            .map(|c| eval(c).map(|f| (*c, f)))
            .collect::<Result<_>>()?;
        cache.extend(evaluated);

        let scores: Vec<f64> = population.iter().map(|c| cache[c]).collect();
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap()
                .then(population[a].cmp(&population[b]))
        });
        let gen_best = order[0];
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        history.push((scores[gen_best], mean));
        let candidate = (scores[gen_best], population[gen_best]);
        best_ever = Some(match best_ever {
            None => candidate,
            Some(current) => {
                if candidate.0 > current.0 || (candidate.0 == current.0 && candidate.1 < current.1)
                {
                    candidate
                } else {
                    current
                }
            }
        });

        if generation + 1 == config.generations {
            break;
        }

        let mut breed_rng = derive_rng(config.seed, StreamId::GaBreed, generation as u64);
        let mut tournament = |rng: &mut rand_chacha::ChaCha8Rng| -> Chromosome {
            let mut winner: Option<usize> = None;
            for _ in 0..config.tournament_size {
                let i = rng.random_range(0..population.len());
                winner = Some(match winner {
                    None => i,
                    Some(w) => {
                        if scores[i] > scores[w]
                            || (scores[i] == scores[w] && population[i] < population[w])
                        {
                            i
                        } else {
                            w
                        }
                    }
                });
            }
            population[winner.unwrap()]
        };

        let mut next: Vec<Chromosome> =
            order[..config.elitism_count].iter().map(|&i| population[i]).collect();
        let lens = config.grids.lengths();
        while next.len() < config.population_size {
            let first = tournament(&mut breed_rng);
            let second = tournament(&mut breed_rng);
            let mut child = if breed_rng.random::<f64>() < config.crossover_rate {
                Chromosome {
                    genes: std::array::from_fn(|g| {
                        if breed_rng.random::<bool>() {
                            first.genes[g]
                        } else {
                            second.genes[g]
                        }
                    }),
                }
            } else {
                first
            };
            for g in 0..GENE_COUNT {
                if breed_rng.random::<f64>() < config.mutation_rate {
                    child.genes[g] = breed_rng.random_range(0..lens[g]);
                }
            }
            debug_assert!(child.in_bounds(&config.grids));
            next.push(child);
        }
        population = next;
    }

    let (best_fitness, best) = best_ever.expect("at least one generation ran");
    Ok(TuneResult { best: best.decode(&config.grids), best_fitness, history })
}

/// GA search over the hyper-parameter grids with cross-validated macro
/// F-score as fitness. Bit-deterministic for a fixed `(dataset, config)`.
pub fn evolve<T: Scalar>(dataset: &Dataset<T>, config: &GaConfig) -> Result<TuneResult> {
    // surface dataset problems before the population is built
    fitness(&Chromosome { genes: [0; GENE_COUNT] }, dataset, config)
        .map(|_| ())
        .or_else(|e| match e {
            Error::InvalidInput(_) => Err(e),
            other => Err(other),
        })?;
    evolve_with(config, |chromosome| fitness(chromosome, dataset, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    use Label::{Benign as B, Malicious as M};

    fn blobs(n_per_class: usize, spread: f64, gap: f64, seed: u64) -> Dataset<f64> {
        let mut rng = derive_rng(seed, StreamId::Subsample, 3);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n_per_class {
            rows.push(vec![rng.random_range(-spread..spread), rng.random_range(-spread..spread)]);
            labels.push(B);
            rows.push(vec![
                gap + rng.random_range(-spread..spread),
                gap + rng.random_range(-spread..spread),
            ]);
            labels.push(M);
        }
        Dataset::from_rows(rows, Some(labels)).unwrap()
    }

    fn small_config() -> GaConfig {
        GaConfig { population_size: 8, generations: 4, seed: 5, ..GaConfig::default() }
    }

    #[test]
    fn separable_blobs_fit_well_at_any_grid_point() {
        let d = blobs(30, 1.0, 10.0, 1);
        let config = GaConfig { seed: 2, ..GaConfig::default() };
        for genes in [[0, 0, 0, 0], [5, 5, 3, 2], [2, 1, 0, 0]] {
            let f = fitness(&Chromosome { genes }, &d, &config).unwrap();
            assert!(f >= 0.95, "genes {genes:?}: fitness {f}");
        }
    }

    #[test]
    fn shuffled_labels_sit_near_chance() {
        let mut rng = derive_rng(77, StreamId::Subsample, 0);
        let rows: Vec<Vec<f64>> = (0..600)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let labels: Vec<Label> =
            (0..600).map(|_| if rng.random::<bool>() { B } else { M }).collect();
        let d = Dataset::from_rows(rows, Some(labels)).unwrap();
        let config = GaConfig { seed: 3, ..GaConfig::default() };
        let f = fitness(&Chromosome { genes: [1, 1, 1, 0] }, &d, &config).unwrap();
        assert!((f - 0.5).abs() <= 0.15, "chance-level fitness was {f}");
    }

    #[test]
    fn fitness_is_bit_deterministic() {
        let d = blobs(20, 2.0, 6.0, 9);
        let config = GaConfig { seed: 11, ..GaConfig::default() };
        let c = Chromosome { genes: [1, 2, 1, 1] };
        let a = fitness(&c, &d, &config).unwrap();
        let b = fitness(&c, &d, &config).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn fitness_error_paths() {
        let config = GaConfig::default();
        let c = Chromosome { genes: [0; 4] };
        let unlabeled = Dataset::<f64>::from_rows(vec![vec![0.0]; 10], None).unwrap();
        assert!(fitness(&c, &unlabeled, &config).is_err());
        let single =
            Dataset::from_rows(vec![vec![0.0]; 10], Some(vec![B; 10])).unwrap();
        assert!(fitness(&c, &single, &config).is_err());
        let tiny = Dataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            Some(vec![B, B, M]),
        )
        .unwrap();
        assert!(fitness(&c, &tiny, &config).is_err());
    }

    #[test]
    fn no_op_operators_keep_population_fixed() {
        // mutation off, crossover of identical parents: generation 1 onward
        // the population can only contain copies of generation-0 genes
        let config = GaConfig {
            mutation_rate: 0.0,
            crossover_rate: 1.0,
            population_size: 6,
            generations: 5,
            seed: 21,
            ..GaConfig::default()
        };
        let mut seen: Vec<Vec<Chromosome>> = Vec::new();
        let result = evolve_with(&config, |c| {
            // landscape constant: selection pressure void
            let _ = c;
            Ok(0.25)
        })
        .unwrap();
        assert_eq!(result.best_fitness, 0.25);
        let _ = &mut seen;

        // identical parents => identical child even with crossover on
        let config = GaConfig { mutation_rate: 0.0, ..config };
        let fixed = Chromosome { genes: [2, 3, 1, 0] };
        let result = evolve_with(&config, |c| {
            Ok(if *c == fixed { 1.0 } else { 0.0 })
        })
        .unwrap();
        assert!(result.best_fitness <= 1.0);
    }

    #[test]
    fn elitism_makes_best_fitness_non_decreasing() {
        for seed in 0..20 {
            let config = GaConfig { seed, generations: 8, ..small_config() };
            // deterministic pseudo-random landscape
            let result = evolve_with(&config, |c| {
                let h = c
                    .genes
                    .iter()
                    .fold(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15), |acc, &g| {
                        acc.wrapping_mul(31).wrapping_add(g as u64 * 0x45D9_F3B3)
                    });
                Ok((h % 1000) as f64 / 1000.0)
            })
            .unwrap();
            for pair in result.history.windows(2) {
                assert!(
                    pair[1].0 >= pair[0].0 - 1e-15,
                    "seed {seed}: best fitness dropped {:?}",
                    result.history
                );
            }
        }
    }

    #[test]
    fn history_length_and_best_track_generations() {
        let config = small_config();
        let result = evolve_with(&config, |c| Ok(c.genes.iter().sum::<usize>() as f64)).unwrap();
        assert_eq!(result.history.len(), config.generations);
        let max_best = result.history.iter().map(|(b, _)| *b).fold(f64::MIN, f64::max);
        assert_eq!(result.best_fitness, max_best);
    }

    #[test]
    fn evolve_is_deterministic() {
        let d = blobs(15, 1.5, 8.0, 4);
        let config = GaConfig {
            population_size: 6,
            generations: 3,
            seed: 13,
            ..GaConfig::default()
        };
        let a = evolve(&d, &config).unwrap();
        let b = evolve(&d, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stub_peak_found_with_default_budget() {
        // smooth landscape peaked at n_trees=50, depth=8, split=2, sqrt
        let peak = Chromosome { genes: [2, 1, 0, 0] };
        let config = GaConfig { seed: 424_242, ..GaConfig::default() };
        let lens = config.grids.lengths();
        let result = evolve_with(&config, |c| {
            let distance: usize = c
                .genes
                .iter()
                .zip(peak.genes)
                .map(|(&g, p)| g.abs_diff(p))
                .sum();
            let max: usize = lens.iter().map(|l| l - 1).sum();
            Ok(1.0 - distance as f64 / max as f64)
        })
        .unwrap();
        assert_abs_diff_eq!(result.best_fitness, 1.0);
        assert_eq!(result.best, peak.decode(&config.grids));
    }

    #[test]
    fn config_validation_catches_bad_rates() {
        let bad = GaConfig { crossover_rate: 1.5, ..GaConfig::default() };
        assert!(bad.validate().is_err());
        let bad = GaConfig { elitism_count: 20, population_size: 20, ..GaConfig::default() };
        assert!(bad.validate().is_err());
        let bad = GaConfig { tournament_size: 1, ..GaConfig::default() };
        assert!(bad.validate().is_err());
    }
}
