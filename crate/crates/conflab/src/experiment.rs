//! Experiment presets and the grid runner.
//!
//! A grid cell is one training run: (method, setting, replication). Cells are
//! independent, seeded by their position in the grid, and may run on a thread
//! pool; outputs are byte-identical regardless of scheduling. Noise and
//! training seeds are shared across methods within a (setting, replication)
//! pair so that method comparisons are paired.
//!
//! Output layout:
//!
//! ```text
//! <output_dir>/<experiment>/<method>/<cell>/epochs.csv
//! <output_dir>/<experiment>/<method>/<cell>/summary.json
//! <output_dir>/<experiment>/<method>/<setting>_median.json
//! <output_dir>/<experiment>/table.csv
//! ```

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use conflab_core::metrics::RunRecord;
use conflab_core::rng::{cell_seed, seeded_stream};
use conflab_core::{
    generalization_gap, inject_noise, make_gaussian_mixture, make_imbalanced, optimal_weights,
    run_ce, run_mixup, run_sam, run_sat, variance_sweep, worst_class_accuracy, Dataset, Method,
    NoiseKind, NoiseSpec, SplitTag, WeightingScenario,
};
use rand::Rng;

use crate::config::{DataConfig, ExperimentConfig, ExperimentKind, MethodName};
use crate::error::{CliError, Result};
use crate::io;

/// Seed-stream tag for variance-lab candidate draws; outside the range the
/// core reserves.
const CANDIDATE_STREAM: u64 = 101;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Setting {
    Plain,
    NoiseRate(f64),
    Ratio(f64),
}

impl Setting {
    fn label(&self) -> String {
        match self {
            Setting::Plain => String::new(),
            Setting::NoiseRate(r) => format!("r{r}"),
            Setting::Ratio(r) => format!("ratio{r}"),
        }
    }

    fn cell_dir_name(&self, replication: usize) -> String {
        match self {
            Setting::Plain => format!("rep{replication}"),
            _ => format!("{}_rep{replication}", self.label()),
        }
    }

    fn median_file_name(&self) -> String {
        match self {
            Setting::Plain => "median.json".to_string(),
            _ => format!("{}_median.json", self.label()),
        }
    }
}

#[derive(Debug, Clone)]
struct Cell {
    method: MethodName,
    setting: Setting,
    replication: usize,
    /// Shared across methods so comparisons are paired.
    pair_index: u64,
    dir: PathBuf,
}

struct CellOutcome {
    record: RunRecord,
    final_test_acc: f64,
    gen_gap: f64,
    worst_class_acc: f64,
    soft_label_uniformity: f64,
}

pub struct ExperimentReport {
    pub cells_run: usize,
    pub failures: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn all_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs the configured experiment grid under `output_dir` with up to `jobs`
/// worker threads.
pub fn run_experiment(
    config: &ExperimentConfig,
    output_dir: &Path,
    base_seed: u64,
    jobs: usize,
) -> Result<ExperimentReport> {
    config.validate()?;
    let exp_dir = output_dir.join(config.experiment.dir_name());

    if config.experiment == ExperimentKind::VarianceLab {
        run_variance_lab(config, &exp_dir, base_seed)?;
        return Ok(ExperimentReport {
            cells_run: 1,
            failures: Vec::new(),
        });
    }

    let settings: Vec<Setting> = match config.experiment {
        ExperimentKind::NoiseSweep => config
            .noise_rates
            .iter()
            .map(|&r| Setting::NoiseRate(r))
            .collect(),
        ExperimentKind::Imbalance => config
            .imbalance_ratios
            .iter()
            .map(|&r| Setting::Ratio(r))
            .collect(),
        _ => vec![Setting::Plain],
    };
    let methods: Vec<MethodName> = match config.experiment {
        // A single run trains exactly the configured method.
        ExperimentKind::SingleRun => vec![config.train.method],
        _ => config.methods.clone(),
    };

    let mut cells = Vec::new();
    for method in &methods {
        for (setting_idx, setting) in settings.iter().enumerate() {
            for rep in 0..config.replications {
                let pair_index = (setting_idx * config.replications + rep) as u64;
                cells.push(Cell {
                    method: *method,
                    setting: *setting,
                    replication: rep,
                    pair_index,
                    dir: exp_dir
                        .join(method.as_str())
                        .join(setting.cell_dir_name(rep)),
                });
            }
        }
    }

    let outcomes = run_cells(&cells, jobs, |cell| run_cell(config, cell, base_seed));

    // Medians per (method, setting), then the aggregate table.
    let mut failures = Vec::new();
    for (cell, outcome) in cells.iter().zip(&outcomes) {
        if let Err(e) = outcome {
            failures.push((cell_label(cell), e.to_string()));
        }
    }

    let mut medians: Vec<(MethodName, Setting, Option<&CellOutcome>)> = Vec::new();
    for method in &methods {
        for setting in &settings {
            let mut group: Vec<&CellOutcome> = cells
                .iter()
                .zip(&outcomes)
                .filter(|(c, _)| c.method == *method && c.setting == *setting)
                .filter_map(|(_, o)| o.as_ref().ok())
                .collect();
            let median = if group.is_empty() {
                None
            } else {
                group.sort_by(|a, b| a.final_test_acc.partial_cmp(&b.final_test_acc).unwrap());
                Some(group[(group.len() - 1) / 2])
            };
            if let Some(m) = median {
                let path = exp_dir
                    .join(method.as_str())
                    .join(setting.median_file_name());
                io::write_json(&path, &summary_json(m))?;
            }
            medians.push((*method, *setting, median));
        }
    }

    write_table(config, &exp_dir, &methods, &settings, &medians)?;

    Ok(ExperimentReport {
        cells_run: cells.len(),
        failures,
    })
}

fn cell_label(cell: &Cell) -> String {
    format!(
        "{}/{}",
        cell.method.as_str(),
        cell.setting.cell_dir_name(cell.replication)
    )
}

fn run_cells<F>(cells: &[Cell], jobs: usize, runner: F) -> Vec<Result<CellOutcome>>
where
    F: Fn(&Cell) -> Result<CellOutcome> + Sync,
{
    let worker_count = jobs.max(1).min(cells.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<CellOutcome>>>> =
        cells.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let outcome = runner(&cells[i]);
                *results[i].lock().unwrap() = Some(outcome);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every cell ran"))
        .collect()
}

/// Builds the train/test pair a cell sees: base data, then the preset's
/// noise or imbalance transformation.
fn cell_datasets(
    config: &ExperimentConfig,
    cell: &Cell,
    base_seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (train, test) = load_base_data(&config.data)?;
    let noise_seed = cell_seed(base_seed, 2 * cell.pair_index);
    match (config.experiment, cell.setting) {
        (ExperimentKind::NoiseSweep, Setting::NoiseRate(rate)) => {
            let spec = NoiseSpec {
                kind: NoiseKind::Uniform,
                rate,
                seed: noise_seed,
            };
            Ok((inject_noise(&train, &spec)?, test))
        }
        (ExperimentKind::RandomLabels, _) => {
            let spec = NoiseSpec {
                kind: NoiseKind::RandomAll,
                rate: 1.0,
                seed: noise_seed,
            };
            Ok((inject_noise(&train, &spec)?, test))
        }
        (ExperimentKind::Imbalance, Setting::Ratio(ratio)) => {
            let sub = make_imbalanced(&train, 0, 1, ratio, noise_seed)?;
            // Keep the test side restricted to the same two classes but
            // balanced: ratio 1 keeps every example of both.
            let test = make_imbalanced(&test, 0, 1, 1.0, noise_seed)?;
            Ok((sub, test))
        }
        (ExperimentKind::SingleRun, _) => {
            let train = match &config.data.noise {
                Some(noise) => {
                    let spec = NoiseSpec {
                        kind: noise.kind.to_kind(),
                        rate: noise.rate,
                        seed: noise.seed,
                    };
                    inject_noise(&train, &spec)?
                }
                None => train,
            };
            Ok((train, test))
        }
        _ => Err(CliError::Config(format!(
            "experiment {:?} has no setting {:?}",
            config.experiment, cell.setting
        ))),
    }
}

pub fn load_base_data(data: &DataConfig) -> Result<(Dataset, Dataset)> {
    if let Some(g) = &data.generator {
        let train_counts = g.expanded_counts(&g.train_per_class);
        let test_counts = g.expanded_counts(&g.test_per_class);
        let train = make_gaussian_mixture(
            g.class_count,
            g.dim,
            &train_counts,
            g.separation,
            g.spread,
            g.seed,
            SplitTag::Train,
        )?;
        let test = make_gaussian_mixture(
            g.class_count,
            g.dim,
            &test_counts,
            g.separation,
            g.spread,
            g.seed,
            SplitTag::Test,
        )?;
        Ok((train, test))
    } else if let Some(csv) = &data.csv {
        let train = io::load_csv(&csv.train, csv.class_count, SplitTag::Train)?;
        let test = io::load_csv(&csv.test, csv.class_count, SplitTag::Test)?;
        Ok((train, test))
    } else if let Some(idx) = &data.idx {
        let train = io::load_idx(&idx.train_images, &idx.train_labels, SplitTag::Train)?;
        let test = io::load_idx(&idx.test_images, &idx.test_labels, SplitTag::Test)?;
        Ok((train, test))
    } else {
        Err(CliError::Config("no data source configured".to_string()))
    }
}

fn run_cell(config: &ExperimentConfig, cell: &Cell, base_seed: u64) -> Result<CellOutcome> {
    let (train, test) = cell_datasets(config, cell, base_seed)?;
    let train_seed = cell_seed(base_seed, 2 * cell.pair_index + 1);
    let core_config = config.train.to_core(cell.method.to_method(), train_seed);

    let record = match cell.method.to_method() {
        Method::Ce | Method::CeEarlyStop => run_ce(&core_config, &train, &test)?.1,
        Method::Sat => run_sat(&core_config, &train, &test)?.2,
        Method::Mixup => run_mixup(&core_config, &train, &test)?.1,
        Method::Sam => run_sam(&core_config, &train, &test)?.2,
    };

    let last = record.last().expect("at least one epoch");
    let outcome = CellOutcome {
        final_test_acc: last.test_acc,
        gen_gap: generalization_gap(last.train_acc_noisy, last.test_acc),
        worst_class_acc: worst_class_accuracy(&last.per_class_test_acc)?,
        soft_label_uniformity: last.soft_label_uniformity,
        record,
    };

    io::write_atomic(
        &cell.dir.join("epochs.csv"),
        io::run_record_to_csv(&outcome.record).as_bytes(),
    )?;
    io::write_json(&cell.dir.join("summary.json"), &summary_json(&outcome))?;
    if matches!(cell.setting, Setting::Ratio(_)) {
        io::write_atomic(
            &cell.dir.join("worst_class.dat"),
            worst_class_dat(&outcome.record).as_bytes(),
        )?;
    }
    Ok(outcome)
}

fn summary_json(outcome: &CellOutcome) -> serde_json::Value {
    serde_json::json!({
        "final_test_acc": outcome.final_test_acc,
        "gen_gap": outcome.gen_gap,
        "worst_class_acc": outcome.worst_class_acc,
        "soft_label_uniformity": outcome.soft_label_uniformity,
    })
}

/// Two-column gnuplot file of the worst-class accuracy curve.
fn worst_class_dat(record: &RunRecord) -> String {
    let mut out = String::from("# epoch worst_class_acc\n");
    for e in &record.epochs {
        let worst = worst_class_accuracy(&e.per_class_test_acc).unwrap_or(f64::NAN);
        out.push_str(&format!("{} {}\n", e.epoch, worst));
    }
    out
}

fn write_table(
    config: &ExperimentConfig,
    exp_dir: &Path,
    methods: &[MethodName],
    settings: &[Setting],
    medians: &[(MethodName, Setting, Option<&CellOutcome>)],
) -> Result<()> {
    let lookup = |method: MethodName, setting: Setting| -> Option<&CellOutcome> {
        medians
            .iter()
            .find(|(m, s, _)| *m == method && *s == setting)
            .and_then(|(_, _, o)| *o)
    };

    let mut table = String::new();
    match config.experiment {
        ExperimentKind::NoiseSweep => {
            table.push_str("noise_rate");
            for m in methods {
                table.push_str(&format!(",{}", m.as_str()));
            }
            table.push('\n');
            for s in settings {
                let Setting::NoiseRate(rate) = s else {
                    continue;
                };
                table.push_str(&format!("{rate}"));
                for m in methods {
                    match lookup(*m, *s) {
                        Some(o) => table.push_str(&format!(",{}", o.final_test_acc)),
                        None => table.push_str(",error"),
                    }
                }
                table.push('\n');
            }
        }
        ExperimentKind::RandomLabels => {
            table.push_str("method,train_acc,test_acc,gen_gap,uniformity\n");
            for m in methods {
                match lookup(*m, Setting::Plain) {
                    Some(o) => {
                        let last = o.record.last().unwrap();
                        table.push_str(&format!(
                            "{},{},{},{},{}\n",
                            m.as_str(),
                            last.train_acc_noisy,
                            o.final_test_acc,
                            o.gen_gap,
                            o.soft_label_uniformity
                        ));
                    }
                    None => table.push_str(&format!("{},error,error,error,error\n", m.as_str())),
                }
            }
        }
        ExperimentKind::Imbalance => {
            // Wide per-epoch worst-class table, one column per method x ratio.
            table.push_str("epoch");
            for m in methods {
                for s in settings {
                    table.push_str(&format!(",{}_{}", m.as_str(), s.label()));
                }
            }
            table.push('\n');
            let max_epochs = medians
                .iter()
                .filter_map(|(_, _, o)| o.map(|o| o.record.len()))
                .max()
                .unwrap_or(0);
            for epoch in 0..max_epochs {
                table.push_str(&format!("{}", epoch + 1));
                for m in methods {
                    for s in settings {
                        match lookup(*m, *s).and_then(|o| o.record.epochs.get(epoch)) {
                            Some(e) => {
                                let worst =
                                    worst_class_accuracy(&e.per_class_test_acc).unwrap_or(f64::NAN);
                                table.push_str(&format!(",{worst}"));
                            }
                            None => table.push(','),
                        }
                    }
                }
                table.push('\n');
            }
        }
        ExperimentKind::SingleRun => {
            table.push_str("method,final_test_acc,gen_gap,worst_class_acc,soft_label_uniformity\n");
            for m in methods {
                match lookup(*m, Setting::Plain) {
                    Some(o) => table.push_str(&format!(
                        "{},{},{},{},{}\n",
                        m.as_str(),
                        o.final_test_acc,
                        o.gen_gap,
                        o.worst_class_acc,
                        o.soft_label_uniformity
                    )),
                    None => table.push_str(&format!("{},error,error,error,error\n", m.as_str())),
                }
            }
        }
        ExperimentKind::VarianceLab => unreachable!("handled separately"),
    }
    io::write_atomic(&exp_dir.join("table.csv"), table.as_bytes())
}

/// The numerical laboratory: simulated estimator variance per candidate
/// weighting next to the closed form.
fn run_variance_lab(config: &ExperimentConfig, exp_dir: &Path, base_seed: u64) -> Result<()> {
    let lab = config.variance_lab.clone().unwrap_or_default();
    let scenario = WeightingScenario {
        in_dist_probs: lab.in_dist_probs.clone(),
        loss_variance: lab.loss_variance,
        in_dist_loss_mean: lab.in_dist_loss_mean,
    };
    let n = scenario.in_dist_probs.len();

    let mut labels = vec![
        "optimal".to_string(),
        "uniform".to_string(),
        "p_squared".to_string(),
    ];
    let mut candidates = vec![
        optimal_weights(&scenario.in_dist_probs),
        vec![1.0 / (n as f64).sqrt(); n],
        optimal_weights(
            &scenario
                .in_dist_probs
                .iter()
                .map(|p| p * p)
                .collect::<Vec<f64>>(),
        ),
    ];
    let mut rng = seeded_stream(base_seed, CANDIDATE_STREAM);
    for i in 0..lab.random_candidates {
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        candidates.push(optimal_weights(&q));
        labels.push(format!("random{i}"));
    }

    let rows = variance_sweep(&scenario, &candidates, lab.trials, base_seed)?;

    let mut table =
        String::from("candidate,empirical_mean,empirical_variance,closed_form_variance\n");
    for (label, row) in labels.iter().zip(&rows) {
        table.push_str(&format!(
            "{label},{},{},{}\n",
            row.empirical_mean, row.empirical_variance, row.closed_form_variance
        ));
    }
    io::write_atomic(&exp_dir.join("table.csv"), table.as_bytes())?;

    let best = rows
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1.empirical_variance
                .partial_cmp(&b.1.empirical_variance)
                .unwrap()
        })
        .map(|(i, _)| labels[i].clone())
        .unwrap_or_default();
    io::write_json(
        &exp_dir.join("summary.json"),
        &serde_json::json!({
            "lowest_empirical_variance": best,
            "trials": lab.trials,
            "in_dist_probs": lab.in_dist_probs,
        }),
    )
}

/// `gen-data`: writes the configured dataset as train/test CSVs plus a JSON
/// sidecar with the seed and the pre-noise labels.
pub fn generate_data(config: &ExperimentConfig, output_dir: &Path) -> Result<()> {
    config.validate()?;
    let generator = config
        .data
        .generator
        .as_ref()
        .ok_or_else(|| CliError::Config("gen-data needs data.generator".to_string()))?;
    let (train, test) = load_base_data(&config.data)?;
    let train = match &config.data.noise {
        Some(noise) => inject_noise(
            &train,
            &NoiseSpec {
                kind: noise.kind.to_kind(),
                rate: noise.rate,
                seed: noise.seed,
            },
        )?,
        None => train,
    };
    io::save_csv(&train, &output_dir.join("train.csv"))?;
    io::save_csv(&test, &output_dir.join("test.csv"))?;
    let sidecar = serde_json::json!({
        "seed": generator.seed,
        "class_count": train.class_count,
        "dim": train.dim(),
        "noise": config.data.noise.as_ref().map(|n| serde_json::to_value(n).unwrap()),
        "train_clean_labels": train.clean_labels.clone().unwrap_or_else(|| train.labels.clone()),
    });
    io::write_json(&output_dir.join("sidecar.json"), &sidecar)
}
