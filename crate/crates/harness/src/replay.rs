//! Line-oriented export of one execution.
//!
//! Records are `slot,event,payload` in slot order; within a slot, block
//! creations come first, then deliveries, then chain adoptions. The last
//! line is the characteristic string.

use std::io::Write;

use delaychain::sim::{ExecutionTrace, Proposer};

pub fn write_trace(trace: &ExecutionTrace, out: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    let mut events: Vec<(i64, u8, String)> = Vec::new();
    for (id, b) in trace.tree.blocks().iter().enumerate().skip(1) {
        let who = match b.proposer {
            Proposer::Honest { party, ordinal } => format!("honest:{}:{ordinal}", party.0),
            Proposer::Adversary => "adversary".to_string(),
            Proposer::Genesis => "genesis".to_string(),
        };
        let parent = b.parent.expect("non-genesis");
        events.push((b.created, 0, format!("id={id} parent={parent} timestamp={} by={who}", b.timestamp)));
    }
    for r in &trace.deliveries {
        if let Some(t) = r.actual {
            let scheduled = r.scheduled.map_or("never".to_string(), |s| s.to_string());
            events.push((t, 1, format!("block={} to={} scheduled={scheduled}", r.block, r.recipient.0)));
        }
    }
    for (party, log) in trace.chain_log.iter().enumerate() {
        for &(slot, tip) in log.iter().skip(1) {
            events.push((slot, 2, format!("party={party} tip={tip} depth={}", trace.tree.depth(tip))));
        }
    }
    // Stable: ties keep creation order.
    events.sort_by_key(|e| (e.0, e.1));
    for (slot, kind, payload) in events {
        let name = ["block", "deliver", "adopt"][kind as usize];
        writeln!(out, "{slot},{name},{payload}")?;
    }
    writeln!(out, "charstring,{}", trace.char_string())
}
