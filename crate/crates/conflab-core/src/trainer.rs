//! The shared epoch/batch loop behind every training method.
//!
//! All five methods run through `train_run` so that their documented
//! degeneracies hold exactly: label momentum 1 reproduces plain cross-entropy
//! training bit for bit, mixup with lambda forced to 1 reproduces plain
//! training, and self-adaptive mixup with a closed gate and unit weights
//! reproduces mixup. Network initialization, epoch shuffling, and mixing each
//! draw from their own RNG stream, so a method that never consumes the mixing
//! stream still sees the same shuffles as one that does.

use alloc::format;
use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::metrics::{self, EpochRecord, RunRecord};
use crate::nn::{Gradients, Network};
use crate::rng::{seeded_stream, stream};
use crate::sam::{convex_combine_into, label_update_gate, sample_lambda, MixHooks};
use crate::sat::{confidence_weight, Method, SoftLabelStore, TrainConfig};

pub(crate) struct TrainOutcome {
    pub net: Network,
    pub store: SoftLabelStore,
    pub record: RunRecord,
    /// Label-correction events per epoch: store rows updated for SAT, mixed
    /// examples that fired the gate for SAM. Always 0 before the start epoch
    /// and for the static-label methods. Consumed by the gate-statistics
    /// tests; the public wrappers drop it.
    #[cfg_attr(not(test), allow(dead_code))]
    pub gate_fires_per_epoch: Vec<usize>,
}

pub(crate) fn train_run(
    cfg: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
    hooks: &MixHooks,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.class_count != test.class_count || train.dim() != test.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} classes x {} dims", train.class_count, train.dim()),
            got: format!("{} classes x {} dims", test.class_count, test.dim()),
        });
    }
    if let Some(lambda) = hooks.force_lambda {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!(
                "forced lambda {lambda} outside [0, 1]"
            )));
        }
    }

    let class_count = train.class_count;
    let mut init_rng = seeded_stream(cfg.seed, stream::NET_INIT);
    let mut net = Network::with_rng(train.dim(), &cfg.hidden_sizes, class_count, &mut init_rng)?;
    let mut store = SoftLabelStore::from_hard_labels(
        &train.labels,
        class_count,
        cfg.start_epoch,
        cfg.momentum,
    )?;
    let mut shuffle_rng = seeded_stream(cfg.seed, stream::SHUFFLE);
    let mut mix_rng = seeded_stream(cfg.seed, stream::MIX);

    let epochs = cfg
        .early_stop_epoch
        .map_or(cfg.total_epochs, |e| e.min(cfg.total_epochs));

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut velocity: Option<Gradients> = None;
    let mut record = RunRecord::new(class_count);
    let mut gate_fires_per_epoch = Vec::with_capacity(epochs);

    for epoch in 1..=epochs {
        order.shuffle(&mut shuffle_rng);
        let correcting = epoch > cfg.start_epoch;
        let mut weight_sum = 0.0;
        let mut weight_min = f64::INFINITY;
        let mut weight_count = 0usize;
        let mut fires = 0usize;

        for chunk in order.chunks(cfg.batch_size) {
            let (trace, labels, weights) = match cfg.method {
                Method::Ce | Method::CeEarlyStop | Method::Sat => {
                    let inputs = gather_rows(&train.features, chunk);
                    let trace = net.forward_trace(&inputs)?;
                    if cfg.method == Method::Sat && correcting {
                        for (row, &i) in chunk.iter().enumerate() {
                            store.update_row(i, trace.probs.row(row));
                        }
                        fires += chunk.len();
                    }
                    // Weights are the soft-label maxima as they stand after
                    // this batch's correction step.
                    let labels = gather_rows(store.soft_labels(), chunk);
                    let weights: Vec<f64> = chunk
                        .iter()
                        .map(|&i| confidence_weight(store.row(i)))
                        .collect();
                    (trace, labels, weights)
                }
                Method::Mixup | Method::Sam => {
                    let k = chunk.len();
                    let mut pair: Vec<usize> = (0..k).collect();
                    pair.shuffle(&mut mix_rng);
                    let mut lambdas = Vec::with_capacity(k);
                    for _ in 0..k {
                        let lambda = match hooks.force_lambda {
                            Some(l) => l,
                            None => sample_lambda(cfg.mix_alpha, &mut mix_rng)?,
                        };
                        lambdas.push(lambda);
                    }

                    let mut inputs = Mat::zeros(k, train.dim());
                    let mut labels = Mat::zeros(k, class_count);
                    for idx in 0..k {
                        let i = chunk[idx];
                        let j = chunk[pair[idx]];
                        convex_combine_into(
                            inputs.row_mut(idx),
                            train.features.row(i),
                            train.features.row(j),
                            lambdas[idx],
                        );
                        convex_combine_into(
                            labels.row_mut(idx),
                            store.row(i),
                            store.row(j),
                            lambdas[idx],
                        );
                    }

                    let trace = net.forward_trace(&inputs)?;
                    let unit_weights = cfg.method == Method::Mixup || hooks.force_unit_weights;
                    let weights: Vec<f64> = (0..k)
                        .map(|idx| {
                            if unit_weights {
                                1.0
                            } else {
                                confidence_weight(trace.probs.row(idx))
                            }
                        })
                        .collect();

                    if cfg.method == Method::Sam && correcting && !hooks.close_gate {
                        for idx in 0..k {
                            let gate = label_update_gate(lambdas[idx], cfg.gamma)?;
                            if gate.first_parent {
                                store.update_row(chunk[idx], trace.probs.row(idx));
                            }
                            if gate.second_parent {
                                store.update_row(chunk[pair[idx]], trace.probs.row(idx));
                            }
                            if gate.any() {
                                fires += 1;
                            }
                        }
                    }
                    (trace, labels, weights)
                }
            };

            for &w in &weights {
                weight_sum += w;
                if w < weight_min {
                    weight_min = w;
                }
            }
            weight_count += weights.len();

            let grads = net.backward_from_trace(&trace, &labels, &weights)?;
            apply_update(&mut net, &grads, cfg, &mut velocity);
        }

        let train_preds = metrics::predictions(&net, &train.features)?;
        let test_preds = metrics::predictions(&net, &test.features)?;
        let labels_changed_count = (0..store.len())
            .filter(|&i| metrics::argmax(store.row(i)) != train.labels[i])
            .count();
        record.push(EpochRecord {
            epoch,
            train_acc_noisy: metrics::fraction_matching(&train_preds, &train.labels),
            train_acc_clean: metrics::fraction_matching(&train_preds, train.ground_truth()),
            test_acc: metrics::fraction_matching(&test_preds, &test.labels),
            mean_weight: weight_sum / weight_count as f64,
            min_weight: weight_min,
            soft_label_uniformity: metrics::uniformity_of_rows(store.soft_labels()),
            per_class_test_acc: metrics::per_class_accuracy(&test_preds, &test.labels, class_count),
            labels_changed_count,
        })?;
        gate_fires_per_epoch.push(fires);
    }

    Ok(TrainOutcome {
        net,
        store,
        record,
        gate_fires_per_epoch,
    })
}

fn gather_rows(src: &Mat, ids: &[usize]) -> Mat {
    let mut out = Mat::zeros(ids.len(), src.cols());
    for (r, &i) in ids.iter().enumerate() {
        out.row_mut(r).copy_from_slice(src.row(i));
    }
    out
}

/// Plain SGD unless momentum or weight decay is configured; the plain path
/// goes through `sgd_step` untouched so the equivalence checks stay bitwise.
fn apply_update(
    net: &mut Network,
    grads: &Gradients,
    cfg: &TrainConfig,
    velocity: &mut Option<Gradients>,
) {
    if cfg.sgd_momentum == 0.0 && cfg.weight_decay == 0.0 {
        net.sgd_step(grads, cfg.learning_rate);
        return;
    }
    let vel = velocity.get_or_insert_with(|| Gradients::zeros_like(net));
    let lr = cfg.learning_rate;
    let mu = cfg.sgd_momentum;
    let wd = cfg.weight_decay;
    for (layer_idx, layer) in net.layers_mut().iter_mut().enumerate() {
        let g = &grads.layers[layer_idx];
        let v = &mut vel.layers[layer_idx];
        for ((w, &gw), vw) in layer
            .weights
            .data_mut()
            .iter_mut()
            .zip(g.weights.data())
            .zip(v.weights.data_mut())
        {
            *vw = mu * *vw + gw + wd * *w;
            *w -= lr * *vw;
        }
        // No decay on biases.
        for ((b, &gb), vb) in layer
            .biases
            .iter_mut()
            .zip(&g.biases)
            .zip(v.biases.iter_mut())
        {
            *vb = mu * *vb + gb;
            *b -= lr * *vb;
        }
    }
}
