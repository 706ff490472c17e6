//! KL-weight annealing: linear from zero to the target by the end of a
//! fixed number of epochs, constant afterwards.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlSchedule {
    pub target: f64,
    /// Global step at which the target is reached (end of the anneal window).
    pub anneal_steps: u64,
}

impl KlSchedule {
    /// Anneal to `target` over `epochs` epochs of `steps_per_epoch` steps.
    pub fn new(target: f64, epochs: usize, steps_per_epoch: usize) -> Self {
        KlSchedule { target, anneal_steps: (epochs * steps_per_epoch) as u64 }
    }

    /// Weight at a global step; monotone non-decreasing, capped at target.
    pub fn weight(&self, step: u64) -> f64 {
        if self.anneal_steps == 0 {
            return self.target;
        }
        let frac = (step as f64 / self.anneal_steps as f64).min(1.0);
        self.target * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_tail() {
        // 6 epochs of 100 steps, target one half.
        let s = KlSchedule::new(0.5, 6, 100);
        assert_eq!(s.weight(0), 0.0);
        assert_eq!(s.weight(600), 0.5);
        assert_eq!(s.weight(601), 0.5);
        assert_eq!(s.weight(10_000), 0.5);
        assert!((s.weight(300) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn monotone_and_capped() {
        let s = KlSchedule::new(0.5, 3, 7);
        let mut prev = -1.0;
        for step in 0..100 {
            let w = s.weight(step);
            assert!(w >= prev);
            assert!(w <= 0.5);
            prev = w;
        }
    }

    #[test]
    fn zero_window_is_constant() {
        let s = KlSchedule::new(0.5, 0, 10);
        assert_eq!(s.weight(0), 0.5);
    }
}
