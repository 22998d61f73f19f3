use std::collections::VecDeque;

use crate::error::Result;
use crate::rng::{RngStream, StreamId};
use crate::time::SimTime;

/// Single-server FIFO station with exponential service times.
#[derive(Clone, Debug)]
pub struct QueueingStation<J> {
    mean_service: SimTime,
    rng: RngStream,
    in_service: Option<J>,
    queue: VecDeque<J>,
    served: u64,
}

impl<J> QueueingStation<J> {
    pub fn new(mean_service: SimTime, rng: RngStream) -> Result<Self> {
        let mut probe = rng.clone();
        probe.sample_exponential(mean_service)?;
        Ok(QueueingStation {
            mean_service,
            rng,
            in_service: None,
            queue: VecDeque::new(),
            served: 0,
        })
    }

    fn start(&mut self, job: J, now: SimTime) -> SimTime {
        self.in_service = Some(job);
        now + self
            .rng
            .sample_exponential(self.mean_service)
            .expect("mean validated at construction")
    }

    /// Adds a job; returns its completion instant if the server was idle.
    pub fn enqueue(&mut self, job: J, now: SimTime) -> Option<SimTime> {
        if self.in_service.is_none() {
            Some(self.start(job, now))
        } else {
            self.queue.push_back(job);
            None
        }
    }

    /// Ends the current service; returns the finished job and, if another
    /// job started, its completion instant.
    pub fn complete(&mut self, now: SimTime) -> (J, Option<SimTime>) {
        let done = self
            .in_service
            .take()
            .expect("completion without a job in service");
        self.served += 1;
        let next = self.queue.pop_front().map(|j| self.start(j, now));
        (done, next)
    }

    pub fn is_idle(&self) -> bool {
        self.in_service.is_none()
    }

    /// Jobs waiting or in service.
    pub fn len(&self) -> usize {
        self.queue.len() + self.in_service.is_some() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn served(&self) -> u64 {
        self.served
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Uplink,
    Downlink,
}

/// Result of a stage completion.
#[derive(Debug)]
pub struct StageStep<J> {
    /// The job that left the last stage, if that was the stage completing.
    pub exit: Option<J>,
    /// Stage completions to schedule: `(stage, instant)`.
    pub starts: Vec<(usize, SimTime)>,
}

/// Stations in series; a job visits each once in order.
#[derive(Clone, Debug)]
pub struct Pipeline<J> {
    stages: Vec<QueueingStation<J>>,
}

impl<J> Pipeline<J> {
    pub fn new(direction: Direction, stages: u8, mean_service: SimTime, seed: u64) -> Result<Self> {
        let uplink = direction == Direction::Uplink;
        let stages = (0..stages)
            .map(|stage| {
                QueueingStation::new(
                    mean_service,
                    RngStream::new(seed, StreamId::ProxyStage { uplink, stage }),
                )
            })
            .collect::<Result<_>>()?;
        Ok(Pipeline { stages })
    }

    pub fn stages(&self) -> usize {
        self.stages.len()
    }

    pub fn stage(&self, i: usize) -> &QueueingStation<J> {
        &self.stages[i]
    }

    /// A job enters the first stage. With zero stages it exits at once.
    pub fn enter(&mut self, job: J, now: SimTime) -> StageStep<J> {
        match self.stages.first_mut() {
            None => StageStep {
                exit: Some(job),
                starts: Vec::new(),
            },
            Some(s) => StageStep {
                exit: None,
                starts: s.enqueue(job, now).map(|t| (0, t)).into_iter().collect(),
            },
        }
    }

    pub fn complete(&mut self, stage: usize, now: SimTime) -> StageStep<J> {
        let (job, next) = self.stages[stage].complete(now);
        let mut starts: Vec<_> = next.map(|t| (stage, t)).into_iter().collect();
        let exit = if stage + 1 == self.stages.len() {
            Some(job)
        } else {
            if let Some(t) = self.stages[stage + 1].enqueue(job, now) {
                starts.push((stage + 1, t));
            }
            None
        };
        StageStep { exit, starts }
    }

    pub fn in_system(&self) -> usize {
        self.stages.iter().map(|s| s.len()).sum()
    }
}
