use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::plan::Source;
use super::{check_chunk, Chunk, ExecutionPlan};
use crate::kernel::{Evaluator, OutputView};
use crate::program::InstanceId;
use crate::types::Buffer;

/// An output element written by two work-items of one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Race {
    pub instance: InstanceId,
    pub point: String,
    pub element: usize,
    pub work_items: (usize, usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RaceReport {
    pub races: Vec<Race>,
    /// Set when the chunk could not be run to completion.
    pub error: Option<String>,
}

impl RaceReport {
    pub fn is_clean(&self) -> bool {
        self.races.is_empty() && self.error.is_none()
    }
}

/// Runs `chunk` sequentially, logging the scalars each work-item writes, and
/// reports every output element touched by more than one work-item (first
/// two writers).
pub fn race_check(plan: &ExecutionPlan, chunk: &Chunk) -> RaceReport {
    let mut report = RaceReport::default();
    let n = match check_chunk(plan, chunk) {
        Ok(n) => n,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    let counts = match plan.work_items(n) {
        Ok(c) => c,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    let streams: Vec<&Buffer> = plan.input_streams().iter().map(|p| &chunk.streams[&p.stream_name()].buffer).collect();
    let mut produced: Vec<Vec<Buffer>> = Vec::new();
    for (step, &count) in plan.steps().iter().zip(&counts) {
        let k = &*step.kernel;
        let ins: Vec<&Buffer> = step
            .sources
            .iter()
            .map(|s| match *s {
                Source::Stream(i) => streams[i],
                Source::Step { step, slot } => &produced[step][slot],
            })
            .collect();
        let mut outs: Vec<Buffer> = k.outputs.iter().map(|(_, ty)| Buffer::zeros(ty.base, count * ty.width as usize)).collect();
        {
            let mut views: Vec<OutputView<'_>> =
                outs.iter_mut().zip(&k.outputs).map(|(b, (_, ty))| OutputView::whole(b, ty.width as usize)).collect();
            let mut ev = Evaluator::new(k).with_write_log();
            // (slot, scalar) -> first writer; elements already reported
            let mut owner: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            let mut reported: BTreeSet<(usize, usize)> = BTreeSet::new();
            for gid in 0..count {
                if let Err((_, e)) = ev.run_range(gid..gid + 1, count, &ins, &mut views) {
                    report.error = Some(format!("instance {}, work-item {gid}: {e}", step.instance));
                    return report;
                }
                let log = ev.write_log.as_mut().expect("log enabled");
                for (slot, scalar) in log.drain(..) {
                    let first = *owner.entry((slot, scalar)).or_insert(gid);
                    let element = scalar / k.outputs[slot].1.width as usize;
                    if first != gid && reported.insert((slot, element)) {
                        report.races.push(Race {
                            instance: step.instance,
                            point: k.outputs[slot].0.clone(),
                            element,
                            work_items: (first, gid),
                        });
                    }
                }
            }
        }
        produced.push(outs);
    }
    report
}
