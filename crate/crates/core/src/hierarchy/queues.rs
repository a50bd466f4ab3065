//! Per-bank read and write queues.
//!
//! Reads have priority. A write is serviced ahead of a waiting read only when
//! the write queue is more than 80% full.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueChoice {
    Read,
    Write,
}

/// The scheduling rule on queue occupancies alone.
pub fn schedule_rule(rdq_len: usize, wrq_len: usize, wrq_cap: usize) -> Option<QueueChoice> {
    match (rdq_len > 0, wrq_len > 0) {
        (false, false) => None,
        (true, false) => Some(QueueChoice::Read),
        (false, true) => Some(QueueChoice::Write),
        // wrq_len / wrq_cap > 0.8, in integers
        (true, true) if wrq_len * 5 > wrq_cap * 4 => Some(QueueChoice::Write),
        (true, true) => Some(QueueChoice::Read),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    /// Line address.
    pub line: u64,
    /// Earliest cycle the bank may start it.
    pub arrival: u64,
    /// Bank occupancy.
    pub cycles: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Serviced {
    pub choice: QueueChoice,
    pub request: Request,
    pub start: u64,
    pub end: u64,
}

/// Queue state seen at one scheduling decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub time: u64,
    pub rdq_len: usize,
    pub wrq_len: usize,
    pub choice: QueueChoice,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueFull;

#[derive(Debug, Clone)]
pub struct BankQueues {
    rdq: VecDeque<Request>,
    wrq: VecDeque<Request>,
    rdq_cap: usize,
    wrq_cap: usize,
    busy_until: u64,
    decisions: Option<Vec<Decision>>,
}

impl BankQueues {
    pub fn new(rdq_cap: usize, wrq_cap: usize) -> Self {
        Self { rdq: VecDeque::new(), wrq: VecDeque::new(), rdq_cap, wrq_cap, busy_until: 0, decisions: None }
    }

    /// Keep a record of every scheduling decision.
    pub fn with_decision_log(mut self) -> Self {
        self.decisions = Some(Vec::new());
        self
    }

    pub fn rdq_len(&self) -> usize {
        self.rdq.len()
    }

    pub fn wrq_len(&self) -> usize {
        self.wrq.len()
    }

    pub fn wrq_cap(&self) -> usize {
        self.wrq_cap
    }

    pub fn busy_until(&self) -> u64 {
        self.busy_until
    }

    pub fn decisions(&self) -> &[Decision] {
        self.decisions.as_deref().unwrap_or(&[])
    }

    pub fn enqueue_read(&mut self, req: Request) -> Result<(), QueueFull> {
        if self.rdq.len() >= self.rdq_cap {
            return Err(QueueFull);
        }
        self.rdq.push_back(req);
        Ok(())
    }

    pub fn enqueue_write(&mut self, req: Request) -> Result<(), QueueFull> {
        if self.wrq.len() >= self.wrq_cap {
            return Err(QueueFull);
        }
        self.wrq.push_back(req);
        Ok(())
    }

    /// Which queue the bank would serve next.
    pub fn schedule_bank(&self) -> Option<QueueChoice> {
        schedule_rule(self.rdq.len(), self.wrq.len(), self.wrq_cap)
    }

    /// A write to `line` is still pending.
    pub fn forward_from_wrq(&self, line: u64) -> bool {
        self.wrq.iter().any(|r| r.line == line)
    }

    /// Serve one request chosen by the scheduling rule, no earlier than `now`.
    pub fn service_next(&mut self, now: u64) -> Option<Serviced> {
        let choice = self.schedule_bank()?;
        self.service(choice, now)
    }

    fn service(&mut self, choice: QueueChoice, now: u64) -> Option<Serviced> {
        let (rdq_len, wrq_len) = (self.rdq.len(), self.wrq.len());
        let request = match choice {
            QueueChoice::Read => self.rdq.pop_front()?,
            QueueChoice::Write => self.wrq.pop_front()?,
        };
        let start = self.busy_until.max(now).max(request.arrival);
        let end = start + request.cycles;
        self.busy_until = end;
        if let Some(log) = self.decisions.as_mut() {
            log.push(Decision { time: start, rdq_len, wrq_len, choice });
        }
        Some(Serviced { choice, request, start, end })
    }

    /// Serve pending writes that the bank can start before `t` while no read
    /// is waiting.
    pub fn drain_idle(&mut self, t: u64) -> Vec<Serviced> {
        let mut out = Vec::new();
        while self.rdq.is_empty() {
            let Some(front) = self.wrq.front() else { break };
            if self.busy_until.max(front.arrival) >= t {
                break;
            }
            out.extend(self.service(QueueChoice::Write, 0));
        }
        out
    }

    /// Force the oldest write out to make room; returns when it finishes.
    pub fn force_write(&mut self, now: u64) -> Option<Serviced> {
        self.service(QueueChoice::Write, now)
    }

    /// Keep the bank busy for `cycles` more, starting no earlier than `from`.
    pub fn occupy(&mut self, from: u64, cycles: u64) {
        if cycles > 0 {
            self.busy_until = self.busy_until.max(from) + cycles;
        }
    }

    /// Serve everything left, in rule order.
    pub fn drain_all(&mut self, now: u64) -> Vec<Serviced> {
        let mut out = Vec::new();
        while let Some(s) = self.service_next(now) {
            out.push(s);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn req(line: u64) -> Request {
        Request { line, arrival: 0, cycles: 5 }
    }

    #[test]
    fn read_preferred_below_threshold() {
        let mut q = BankQueues::new(8, 32);
        q.enqueue_read(req(1)).unwrap();
        for i in 0..10 {
            q.enqueue_write(req(100 + i)).unwrap();
        }
        assert_eq!(q.schedule_bank(), Some(QueueChoice::Read));
    }

    #[test]
    fn write_served_above_eighty_percent() {
        assert_eq!(schedule_rule(1, 25, 32), Some(QueueChoice::Read));
        assert_eq!(schedule_rule(1, 26, 32), Some(QueueChoice::Write));
        assert_eq!(schedule_rule(0, 1, 32), Some(QueueChoice::Write));
        assert_eq!(schedule_rule(0, 0, 32), None);
    }

    #[test]
    fn capacity_is_enforced() {
        let mut q = BankQueues::new(1, 2);
        q.enqueue_read(req(1)).unwrap();
        assert_eq!(q.enqueue_read(req(2)), Err(QueueFull));
        q.enqueue_write(req(1)).unwrap();
        q.enqueue_write(req(2)).unwrap();
        assert_eq!(q.enqueue_write(req(3)), Err(QueueFull));
    }

    #[test]
    fn idle_drain_stops_at_arrival() {
        let mut q = BankQueues::new(8, 32);
        q.enqueue_write(Request { line: 1, arrival: 0, cycles: 10 }).unwrap();
        q.enqueue_write(Request { line: 2, arrival: 0, cycles: 10 }).unwrap();
        let served = q.drain_idle(5);
        assert_eq!(served.len(), 1);
        assert_eq!(q.busy_until(), 10);
        assert!(q.forward_from_wrq(2));
        assert!(!q.forward_from_wrq(1));
    }

    proptest! {
        #[test]
        fn every_decision_obeys_the_rule(ops in prop::collection::vec(0u8..3, 1..400)) {
            let mut q = BankQueues::new(8, 32).with_decision_log();
            let mut t = 0;
            for op in ops {
                t += 1;
                match op {
                    0 => { let _ = q.enqueue_read(req(t)); }
                    1 => { let _ = q.enqueue_write(req(t)); }
                    _ => { q.service_next(t); }
                }
                prop_assert!(q.rdq_len() <= 8 && q.wrq_len() <= 32);
            }
            q.drain_all(t);
            let mut last_start = 0;
            for d in q.decisions() {
                prop_assert_eq!(Some(d.choice), schedule_rule(d.rdq_len, d.wrq_len, 32));
                prop_assert!(d.time >= last_start);
                last_start = d.time;
            }
        }
    }
}
