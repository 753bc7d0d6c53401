use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::ExperimentConfig;
use super::contraction::{run_contraction_check, ContractionReport, MeasuredConstants};
use super::decay::{run_decay_experiment, DecayFitReport};
use super::problem::Problem;
use super::report::{run_label, LabeledRecord};
use crate::error::Result;

/// Applies `f` to every job on up to `threads` workers; results keep the
/// job order.
pub fn fan_out<T, R, F>(jobs: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = threads.clamp(1, jobs.len().max(1));
    if workers == 1 {
        return jobs.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = f(&jobs[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// Decay runs over the `epsilon x seed` matrix.
pub fn decay_suite(
    problem: &Problem,
    cfg: &ExperimentConfig,
) -> Result<(Vec<DecayFitReport>, Vec<LabeledRecord>)> {
    let jobs: Vec<(f64, u64)> = cfg
        .epsilons
        .iter()
        .flat_map(|&e| cfg.seeds.iter().map(move |&s| (e, s)))
        .collect();
    let results = fan_out(&jobs, cfg.threads, |&(eps, seed)| {
        run_decay_experiment(problem, cfg, eps, seed)
    });
    let mut reports = Vec::new();
    let mut records = Vec::new();
    for ((eps, seed), r) in jobs.into_iter().zip(results) {
        let (rep, rec) = r?;
        reports.push(rep);
        records.push(LabeledRecord {
            label: run_label("decay", eps, seed),
            record: rec,
        });
    }
    Ok((reports, records))
}

/// Contraction checks, one per epsilon.
pub fn contraction_suite(
    problem: &Problem,
    cfg: &ExperimentConfig,
    consts: &MeasuredConstants,
) -> Result<Vec<ContractionReport>> {
    let eps: Vec<f64> = cfg.epsilons.iter().copied().filter(|e| *e > 0.0).collect();
    fan_out(&eps, cfg.threads, |&e| {
        run_contraction_check(problem, cfg, e, consts)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::fan_out;

    #[test]
    fn order_is_kept_for_any_worker_count() {
        let jobs: Vec<u64> = (0..37).collect();
        let serial = fan_out(&jobs, 1, |x| x * x + 1);
        for t in [2, 3, 8, 64] {
            assert_eq!(fan_out(&jobs, t, |x| x * x + 1), serial);
        }
        assert!(fan_out(&Vec::<u64>::new(), 4, |x| *x).is_empty());
    }
}
