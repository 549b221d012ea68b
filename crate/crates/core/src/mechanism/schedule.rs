/// Doubling epochs `L_k = 2^k`: epoch `k` covers rounds `[2^k, 2^{k+1})` and
/// the policy is re-solved after round `2^{k+1} - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochSchedule {
    horizon: usize,
    last_epoch: u32,
}

impl EpochSchedule {
    pub fn new(horizon: usize) -> Self {
        let horizon = horizon.max(1);
        let last_epoch = horizon.next_power_of_two().trailing_zeros();
        Self { horizon, last_epoch }
    }

    /// `K = ⌈log₂ T⌉`.
    pub fn last_epoch(&self) -> u32 {
        self.last_epoch
    }

    /// `L_k = 2^k`.
    pub fn boundary(k: u32) -> usize {
        1usize << k
    }

    /// Epoch that round `t` (1-based) belongs to.
    pub fn epoch_of(t: usize) -> u32 {
        usize::BITS - 1 - t.max(1).leading_zeros()
    }

    /// Whether the policy is re-solved after round `t`. No update happens
    /// after the final round.
    pub fn updates_after(&self, t: usize) -> bool {
        t < self.horizon && (t + 1).is_power_of_two() && Self::epoch_of(t + 1) <= self.last_epoch
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries() {
        let s = EpochSchedule::new(16);
        assert_eq!(s.last_epoch(), 4);
        let updates: Vec<usize> = (1..=16).filter(|t| s.updates_after(*t)).collect();
        assert_eq!(updates, vec![1, 3, 7, 15]);
        assert_eq!(EpochSchedule::epoch_of(1), 0);
        assert_eq!(EpochSchedule::epoch_of(2), 1);
        assert_eq!(EpochSchedule::epoch_of(7), 2);
        assert_eq!(EpochSchedule::epoch_of(8), 3);
        let s = EpochSchedule::new(10);
        let updates: Vec<usize> = (1..=10).filter(|t| s.updates_after(*t)).collect();
        assert_eq!(updates, vec![1, 3, 7]);
        assert!(!EpochSchedule::new(1).updates_after(1));
        assert_eq!(EpochSchedule::boundary(3), 8);
    }
}
