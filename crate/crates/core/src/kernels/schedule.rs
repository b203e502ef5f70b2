//! Step-decay learning rate schedule.

/// `lr(epoch) = base_lr * gamma^floor(epoch / step_epochs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub gamma: f64,
    pub step_epochs: usize,
}

impl LrSchedule {
    pub fn new(base_lr: f64, gamma: f64, step_epochs: usize) -> Self {
        LrSchedule {
            base_lr,
            gamma,
            step_epochs: step_epochs.max(1),
        }
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        self.base_lr * self.gamma.powi((epoch / self.step_epochs) as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tenfold_decay_every_eight_epochs() {
        let s = LrSchedule::new(1e-4, 0.1, 8);
        for e in 0..8 {
            assert_eq!(s.lr(e), 1e-4);
        }
        for e in 8..16 {
            assert!((s.lr(e) - 1e-5).abs() < 1e-20);
        }
        assert!((s.lr(16) - 1e-6).abs() < 1e-21);
    }
}
