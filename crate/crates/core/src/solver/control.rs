use super::config::SwarmConfig;

/// Guaranteed-convergence control state, replicated identically on every
/// agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcpsoControl {
    /// Cycle counter.
    pub t: usize,
    /// Consecutive cycles in which the global best improved.
    pub successes: u32,
    /// Consecutive cycles in which it did not.
    pub failures: u32,
    /// Diameter of the random search around the global best.
    pub rho: f64,
    /// Particle that currently holds the global best.
    pub best: Option<usize>,
}

impl Default for GcpsoControl {
    fn default() -> Self {
        GcpsoControl { t: 0, successes: 0, failures: 0, rho: 1.0, best: None }
    }
}

impl GcpsoControl {
    /// Advances one cycle. `improved` is whether the global best fitness
    /// strictly decreased this cycle. ρ is rescaled from the streaks as they
    /// stood before this cycle, then the streaks are updated.
    pub fn update(&self, improved: bool, config: &SwarmConfig) -> GcpsoControl {
        let mut next = *self;
        next.t += 1;
        if self.successes > config.max_successes {
            next.rho = self.rho * 2.0;
        } else if self.failures > config.max_failures {
            next.rho = (self.rho * 0.5).max(f64::MIN_POSITIVE);
        }
        if improved {
            next.successes += 1;
            next.failures = 0;
        } else {
            next.successes = 0;
            next.failures += 1;
        }
        next
    }
}
