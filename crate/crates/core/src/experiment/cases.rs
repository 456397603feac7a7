//! Built-in experiments for the four case studies.

use super::{Axis, DoeSpec, ExperimentSpec, Metric};
use crate::doe::Factor;
use crate::hlf::{default_config, HlfConfig};

pub const CASE_STUDY_IDS: [u8; 4] = [1, 2, 3, 4];

fn base(block_size: u64, timeout: f64) -> HlfConfig {
    HlfConfig {
        block_size,
        timeout,
        ..default_config()
    }
}

/// Timeout grid for case study 3, in seconds.
const TIMEOUT_GRID: [f64; 15] = [
    0.0, 0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0,
];

/// Specs making up case study `id`, or `None` for an unknown id.
pub fn case_study(id: u8) -> Option<Vec<ExperimentSpec>> {
    let specs = match id {
        // commit capacity against load
        1 => {
            let mut s = ExperimentSpec::new("cs1", base(1, 10.0));
            s.sweep = vec![
                Axis::new("cp", vec![2.0, 4.0, 6.0]),
                Axis::range("arrival_rate_tps", 2.5, 200.0, 15.0),
            ];
            s.split_by = Some("cp".into());
            vec![s]
        }
        // block size and timeout at a fixed 100 tps
        2 => {
            let mut blocks =
                ExperimentSpec::new("cs2_block", base(1, 100.0).with_arrival_rate(100.0));
            blocks.sweep = vec![Axis::range("block_size", 1.0, 10.0, 1.0)];
            let mut timeouts =
                ExperimentSpec::new("cs2_timeout", base(10, 100.0).with_arrival_rate(100.0));
            timeouts.sweep = vec![Axis::log("timeout_s", 0.01, 100.0, 9)];
            vec![blocks, timeouts]
        }
        // full-block against timeout cuts
        3 => {
            let mut s = ExperimentSpec::new("cs3", base(6, 0.0).with_arrival_rate(100.0));
            s.sweep = vec![Axis::new("timeout_s", TIMEOUT_GRID.to_vec())];
            vec![s]
        }
        // 2^5 sensitivity of MRT
        4 => {
            let mut s = ExperimentSpec::new("cs4", base(1, 10.0).with_arrival_rate(10.0));
            s.doe = Some(DoeSpec {
                factors: vec![
                    Factor::new("block_size", 2.0, 10.0),
                    Factor::new("timeout_s", 0.01, 100.0),
                    Factor::new("ep_1", 2.0, 6.0),
                    Factor::new("op_1", 2.0, 6.0),
                    Factor::new("cp_1", 2.0, 6.0),
                ],
                response: Metric::MrtS,
                order_seed: 1,
            });
            vec![s]
        }
        _ => return None,
    };
    Some(specs)
}
