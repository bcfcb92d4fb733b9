use super::{candidate_count, SearchConfig, Strategy};

/// Model calls a configuration will make.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NfePlan {
    pub nfe: u64,
    /// False when the count is an upper bound (particle sampling, whose
    /// lookahead reuse depends on which particles survive resampling).
    pub exact: bool,
}

/// Survivors and whether they already sit on a lookahead path.
struct Pool {
    size: u64,
    evaluated: bool,
    t: u64,
}

impl Pool {
    fn advance(&mut self, to_t: u64) -> u64 {
        let cost = if self.evaluated { 0 } else { self.size * (self.t - to_t) };
        self.t = to_t;
        cost
    }

    /// Branch into `children`, one deterministic child per parent. Returns
    /// the predictions at the branch point plus lookahead of children
    /// without a path.
    fn branch(&mut self, children: u64) -> u64 {
        let lookahead_each = self.t - 1;
        let cost = if self.evaluated {
            (children - self.size) * lookahead_each
        } else {
            self.size + children * lookahead_each
        };
        self.size = children;
        self.t -= 1;
        self.evaluated = true;
        cost
    }

    fn finish(&self) -> u64 {
        if self.evaluated {
            0
        } else {
            self.size * self.t
        }
    }
}

/// Model calls for `config` on a prompt at distance `d_sem`, computed from
/// pool sizes alone (rewards never change the count, except as noted on
/// [`NfePlan::exact`]).
pub fn planned_nfe(config: &SearchConfig, d_sem: f64) -> NfePlan {
    let big_t = config.steps as u64;
    let steps = &config.imagery_schedule;
    match config.strategy {
        Strategy::BestOfN => NfePlan { nfe: config.n_base.max(1) as u64 * big_t, exact: true },
        Strategy::Imagery | Strategy::Beam => {
            let (width, retain): (u64, Vec<u64>) = if config.strategy == Strategy::Imagery {
                let sizes: Vec<u64> = config
                    .size_schedule
                    .iter()
                    .map(|&n| candidate_count(n, config.lambda, d_sem) as u64)
                    .collect();
                (sizes[0], sizes[1..].to_vec())
            } else {
                let w = config.n_base as u64;
                (w, vec![w; steps.len()])
            };
            let mut pool = Pool { size: width, evaluated: false, t: big_t };
            let mut nfe = 0;
            for (i, &s) in steps.iter().enumerate() {
                nfe += pool.advance(big_t - s as u64);
                let children = if config.strategy == Strategy::Imagery {
                    width.max(pool.size)
                } else {
                    pool.size * config.branch_factor as u64
                };
                nfe += pool.branch(children);
                pool.size = pool.size.min(retain[i]);
            }
            NfePlan { nfe: nfe + pool.finish(), exact: true }
        }
        Strategy::Particle => {
            // Every particle is on a path after the first resample; at most
            // n − 1 copies per resample leave it and pay for the rest.
            let n = config.n_base as u64;
            let fresh: u64 = steps.iter().map(|&s| (n - 1) * (big_t - s as u64 - 1)).sum();
            NfePlan { nfe: n * big_t + fresh, exact: steps.is_empty() || n == 1 }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_of_n_is_n_trajectories() {
        let mut c = SearchConfig::new(Strategy::BestOfN);
        c.n_base = 4;
        assert_eq!(planned_nfe(&c, 0.0).nfe, 200);
    }

    #[test]
    fn empty_imagery_schedule_is_pool_times_t() {
        let mut c = SearchConfig::new(Strategy::Imagery);
        c.imagery_schedule = vec![];
        c.size_schedule = vec![3];
        assert_eq!(planned_nfe(&c, 0.0).nfe, 150);
        assert_eq!(planned_nfe(&c, 1.0).nfe, 300);
    }

    #[test]
    fn beam_single_expand_ledger() {
        // width 2 advances 25 steps (50), two predictions at the branch
        // point (2), six children look ahead from t = 24 (144); survivors
        // finish along their paths.
        let mut c = SearchConfig::new(Strategy::Beam);
        c.n_base = 2;
        c.branch_factor = 3;
        c.imagery_schedule = vec![25];
        assert_eq!(planned_nfe(&c, 0.0), NfePlan { nfe: 196, exact: true });
    }

    #[test]
    fn later_branches_only_pay_for_new_children() {
        // 3 roll out at step 5 (3·50), retain 1; at step 20 two new
        // children look ahead from t = 29.
        let mut c = SearchConfig::new(Strategy::Imagery);
        c.lambda = 0.0;
        c.imagery_schedule = vec![5, 20];
        c.size_schedule = vec![3, 1, 1];
        assert_eq!(planned_nfe(&c, 0.0).nfe, 150 + 2 * 29);
    }
}
