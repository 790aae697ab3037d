//! Per-application delivery and latency statistics and requirement verdicts.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::frame::ApplicationId;
use crate::time::SimTime;

/// Counters of one application. Frames still queued, on a link or awaiting
/// injection when the run stops are "in flight". In-flight frames created within
/// the final drain window are "excluded": left out of both sides of the RDR.
/// Older undelivered frames count as lost.
#[derive(Debug, Clone, PartialEq)]
pub struct AppStats {
    pub app: ApplicationId,
    pub frames_sent: u64,
    pub bytes_sent: u64,
    pub frames_received: u64,
    pub bytes_received: u64,
    pub frames_dropped: u64,
    pub bytes_dropped: u64,
    pub frames_in_flight: u64,
    pub bytes_in_flight: u64,
    pub frames_excluded: u64,
    pub bytes_excluded: u64,
    delays_ns: Vec<u64>,
    network_delay_sum_ns: u128,
}

impl AppStats {
    pub fn new(app: ApplicationId) -> Self {
        AppStats {
            app,
            frames_sent: 0,
            bytes_sent: 0,
            frames_received: 0,
            bytes_received: 0,
            frames_dropped: 0,
            bytes_dropped: 0,
            frames_in_flight: 0,
            bytes_in_flight: 0,
            frames_excluded: 0,
            bytes_excluded: 0,
            delays_ns: Vec::new(),
            network_delay_sum_ns: 0,
        }
    }

    pub fn record_sent(&mut self, bytes: u64) {
        self.frames_sent += 1;
        self.bytes_sent += bytes;
    }

    /// `delay` runs from creation, `network_delay` from entry into the source's egress buffer.
    pub fn record_received(&mut self, bytes: u64, delay: SimTime, network_delay: SimTime) {
        self.frames_received += 1;
        self.bytes_received += bytes;
        self.delays_ns.push(delay.as_nanos());
        self.network_delay_sum_ns += u128::from(network_delay.as_nanos());
    }

    pub fn record_dropped(&mut self, bytes: u64) {
        self.frames_dropped += 1;
        self.bytes_dropped += bytes;
    }

    pub fn record_in_flight(&mut self, bytes: u64, excluded: bool) {
        self.frames_in_flight += 1;
        self.bytes_in_flight += bytes;
        if excluded {
            self.frames_excluded += 1;
            self.bytes_excluded += bytes;
        }
    }

    pub fn delays(&self) -> &[u64] {
        &self.delays_ns
    }

    pub fn summary(&self) -> AppSummary {
        let mut sorted = self.delays_ns.clone();
        sorted.sort_unstable();
        let n = sorted.len();
        let (mean, max, p99, net) = if n == 0 {
            (None, None, None, None)
        } else {
            let sum: u128 = sorted.iter().map(|&d| u128::from(d)).sum();
            // nearest rank
            let rank = (n * 99).div_ceil(100).max(1);
            (
                Some(sum as f64 / n as f64 / 1e6),
                Some(sorted[n - 1] as f64 / 1e6),
                Some(sorted[rank - 1] as f64 / 1e6),
                Some(self.network_delay_sum_ns as f64 / n as f64 / 1e6),
            )
        };
        AppSummary {
            app: self.app,
            frames_sent: self.frames_sent,
            bytes_sent: self.bytes_sent,
            frames_received: self.frames_received,
            bytes_received: self.bytes_received,
            frames_dropped: self.frames_dropped,
            bytes_dropped: self.bytes_dropped,
            frames_in_flight: self.frames_in_flight,
            bytes_in_flight: self.bytes_in_flight,
            frames_excluded: self.frames_excluded,
            bytes_excluded: self.bytes_excluded,
            rdr_percent: rdr_percent(self),
            frame_rdr_percent: ratio(self.frames_received, self.frames_sent - self.frames_excluded),
            mean_delay_ms: mean,
            max_delay_ms: max,
            p99_delay_ms: p99,
            mean_network_delay_ms: net,
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// `100 × received / (sent − excluded)` over bytes; `None` when nothing settled.
pub fn rdr_percent(stats: &AppStats) -> Option<f64> {
    ratio(stats.bytes_received, stats.bytes_sent - stats.bytes_excluded)
}

/// Report view of [`AppStats`]; delays in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppSummary {
    pub app: ApplicationId,
    pub frames_sent: u64,
    pub bytes_sent: u64,
    pub frames_received: u64,
    pub bytes_received: u64,
    pub frames_dropped: u64,
    pub bytes_dropped: u64,
    pub frames_in_flight: u64,
    pub bytes_in_flight: u64,
    pub frames_excluded: u64,
    pub bytes_excluded: u64,
    pub rdr_percent: Option<f64>,
    pub frame_rdr_percent: Option<f64>,
    pub mean_delay_ms: Option<f64>,
    pub max_delay_ms: Option<f64>,
    pub p99_delay_ms: Option<f64>,
    pub mean_network_delay_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DelayRule {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementSpec {
    pub app: ApplicationId,
    pub max_latency: SimTime,
    pub min_rdr_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Requirements {
    #[serde(default)]
    pub delay_rule: DelayRule,
    pub apps: Vec<RequirementSpec>,
}

impl Default for Requirements {
    fn default() -> Self {
        let req = |app, ms| RequirementSpec {
            app,
            max_latency: SimTime::from_millis(ms),
            min_rdr_percent: 99.9,
        };
        Requirements {
            delay_rule: DelayRule::Max,
            apps: vec![
                req(ApplicationId::RemoteControl, 1),
                req(ApplicationId::Safety, 1),
                req(ApplicationId::Ar, 50),
                req(ApplicationId::Agv, 20),
                req(ApplicationId::ConditionMonitoring, 100),
            ],
        }
    }
}

impl Requirements {
    pub fn validate(&self) -> Result<()> {
        for r in &self.apps {
            if r.max_latency == SimTime::ZERO || !(r.min_rdr_percent > 0.0 && r.min_rdr_percent <= 100.0) {
                return Err(SimError::config(format!("requirement for {} must be positive", r.app)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NoData,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NoData => "no_data",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequirementRow {
    pub app: ApplicationId,
    pub rdr: Verdict,
    pub delay: Verdict,
}

impl RequirementRow {
    pub fn passed(&self) -> bool {
        self.rdr == Verdict::Pass && self.delay == Verdict::Pass
    }
}

pub fn requirements_matrix(stats: &[AppSummary], reqs: &Requirements) -> Vec<RequirementRow> {
    reqs.apps
        .iter()
        .map(|r| {
            let Some(s) = stats.iter().find(|s| s.app == r.app) else {
                return RequirementRow {
                    app: r.app,
                    rdr: Verdict::NoData,
                    delay: Verdict::NoData,
                };
            };
            let judge = |v: Option<f64>, ok: &dyn Fn(f64) -> bool| match v {
                None => Verdict::NoData,
                Some(v) if ok(v) => Verdict::Pass,
                Some(_) => Verdict::Fail,
            };
            let delay = match reqs.delay_rule {
                DelayRule::Max => s.max_delay_ms,
                DelayRule::Mean => s.mean_delay_ms,
            };
            let bound = r.max_latency.as_millis_f64();
            RequirementRow {
                app: r.app,
                rdr: judge(s.rdr_percent, &|v| v >= r.min_rdr_percent),
                delay: judge(delay, &|v| v <= bound),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(sent: u64, received: u64) -> AppStats {
        let mut s = AppStats::new(ApplicationId::Ar);
        s.bytes_sent = sent;
        s.bytes_received = received;
        s
    }

    #[test]
    fn rdr_examples() {
        assert_eq!(rdr_percent(&stats(1000, 1000)), Some(100.0));
        assert_eq!(rdr_percent(&stats(1000, 0)), Some(0.0));
        assert_eq!(rdr_percent(&stats(0, 0)), None);
        let mut s = stats(1000, 500);
        s.bytes_in_flight = 500;
        assert_eq!(rdr_percent(&s), Some(50.0));
        s.bytes_excluded = 500;
        assert_eq!(rdr_percent(&s), Some(100.0));
    }

    #[test]
    fn delay_summary() {
        let mut s = AppStats::new(ApplicationId::Safety);
        for us in 1..=100 {
            s.record_sent(500);
            s.record_received(500, SimTime::from_micros(us), SimTime::from_micros(us));
        }
        let sum = s.summary();
        assert_eq!(sum.max_delay_ms, Some(0.1));
        assert_eq!(sum.p99_delay_ms, Some(0.099));
        assert!((sum.mean_delay_ms.unwrap() - 0.0505).abs() < 1e-12);
        assert_eq!(sum.rdr_percent, Some(100.0));
    }

    #[test]
    fn missing_app_is_no_data() {
        let rows = requirements_matrix(&[], &Requirements::default());
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.rdr == Verdict::NoData && r.delay == Verdict::NoData));
    }

    #[test]
    fn verdicts_follow_rule() {
        let mut s = AppStats::new(ApplicationId::RemoteControl);
        s.record_sent(354);
        s.record_sent(354);
        s.record_received(354, SimTime::from_micros(100), SimTime::from_micros(100));
        s.record_received(354, SimTime::from_micros(1500), SimTime::from_micros(1500));
        let mut reqs = Requirements::default();
        let rc = |reqs: &Requirements| requirements_matrix(&[s.summary()], reqs)[0].clone();
        assert_eq!(rc(&reqs).delay, Verdict::Fail);
        assert_eq!(rc(&reqs).rdr, Verdict::Pass);
        reqs.delay_rule = DelayRule::Mean;
        assert_eq!(rc(&reqs).delay, Verdict::Pass);
    }
}
