//! Episode trace CSV export for diagnostics.

use std::io::Write;

use super::probe::TraceStep;

const TRACE_HEADER: &str = "step,clock_s,floor,action,reward,boarded,delivered,waiting";

/// Write a recorded episode as CSV with LF line endings. The `action` column
/// carries the stable action code.
pub fn write_trace_csv<W: Write>(steps: &[TraceStep], mut sink: W) -> std::io::Result<()> {
    writeln!(sink, "{TRACE_HEADER}")?;
    for s in steps {
        writeln!(
            sink,
            "{},{},{},{},{},{},{},{}",
            s.step,
            s.clock_s,
            s.next_obs.current_floor,
            s.action.code(),
            s.reward,
            s.boarded,
            s.delivered,
            s.waiting
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Action, Observation};

    #[test]
    fn writes_header_and_rows() {
        let obs = Observation {
            up_buttons: vec![false; 2],
            down_buttons: vec![false; 2],
            car_buttons: vec![false; 2],
            current_floor: 1,
        };
        let steps = vec![TraceStep {
            step: 0,
            clock_s: 27_015.0,
            obs: obs.clone(),
            action: Action::OpenCloseUp,
            next_obs: Observation {
                current_floor: 1,
                ..obs
            },
            arrivals: vec![],
            reward: -15.0,
            boarded: 1,
            delivered: 0,
            waiting: 1,
        }];
        let mut out = Vec::new();
        write_trace_csv(&steps, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "step,clock_s,floor,action,reward,boarded,delivered,waiting\n0,27015,1,1,-15,1,0,1\n"
        );
    }
}
