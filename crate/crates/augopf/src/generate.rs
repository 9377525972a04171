//! Order-preserving parallel labelling.

use augopf_core::case::NetworkCase;
use augopf_core::dataset::{Dataset, DatasetError, DatasetMeta, LabelJob, LoadProfile};
use augopf_core::opf::{assemble_problem, OpfProblem};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub(crate) fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Same records, in the same load-major order, as the sequential
/// `generate_dataset`, for any worker count.
pub fn generate_parallel(
    case: &NetworkCase,
    profile: &LoadProfile,
    job: &LabelJob<'_>,
    workers: usize,
) -> Result<Dataset> {
    if job.k_init == 0 {
        return Err(DatasetError::NoInitialPoints.into());
    }
    let problems = profile
        .instances
        .iter()
        .map(|load| assemble_problem(case, load))
        .collect::<Result<Vec<OpfProblem<'_>>, _>>()?;
    let k = job.k_init;
    let records = pool(workers)?.install(|| {
        (0..problems.len() * k)
            .into_par_iter()
            .map(|t| job.label(&problems[t / k], t / k, t % k))
            .collect()
    });
    Ok(Dataset {
        records,
        meta: DatasetMeta {
            case_name: case.name.clone(),
            seed: job.seed,
            mix_ratio: None,
            scalers: None,
        },
    })
}
