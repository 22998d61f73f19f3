use crate::coap::{ETag, Token};
use crate::time::SimTime;

use super::estimator::{EstimatorParams, FreshnessEstimator};

/// An outstanding refresh for a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PendingRefresh {
    pub token: Token,
    pub since: SimTime,
    pub expires_at: SimTime,
}

#[derive(Clone, Debug)]
pub struct CacheRecord {
    pub resource: u32,
    pub version: Option<u64>,
    pub etag: Option<ETag>,
    pub last_update_at: Option<SimTime>,
    pub estimator: FreshnessEstimator,
    pub pending: Option<PendingRefresh>,
    pub updates: u64,
}

impl CacheRecord {
    pub fn new(resource: u32, params: EstimatorParams) -> Self {
        CacheRecord {
            resource,
            version: None,
            etag: None,
            last_update_at: None,
            estimator: FreshnessEstimator::new(params),
            pending: None,
            updates: 0,
        }
    }

    pub fn age(&self, now: SimTime) -> Option<SimTime> {
        self.last_update_at.map(|t| now.saturating_sub(t))
    }

    /// Older than `threshold`, or never filled.
    pub fn is_stale(&self, now: SimTime, threshold: SimTime) -> bool {
        self.age(now).is_none_or(|a| a > threshold)
    }

    pub fn max_age(&self) -> Option<SimTime> {
        self.estimator.max_age()
    }

    /// Fresh data arrived. Returns the jitter-corrected inter-arrival sample
    /// fed to the estimator, if any.
    pub fn on_data_arrival(
        &mut self,
        version: Option<u64>,
        etag: Option<ETag>,
        now: SimTime,
    ) -> Option<f64> {
        let gap = self.age(now);
        let sample = self.estimator.on_arrival(gap);
        self.version = version.or(self.version);
        self.etag = etag.or(self.etag);
        self.last_update_at = Some(now);
        self.pending = None;
        self.updates += 1;
        sample
    }
}
