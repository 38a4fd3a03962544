use super::Trace;

/// Round boundaries: configuration indices at which each complete round
/// ends. A round ends once every process enabled at its start has acted or
/// been neutralized. A trailing incomplete round is not reported.
pub fn rounds<S: Clone>(trace: &Trace<S>) -> Vec<usize> {
    let n = trace.node_count();
    let mut boundaries = Vec::new();
    let mut pending = vec![false; n];
    let mut left = 0usize;
    let start = |idx: usize, pending: &mut [bool]| {
        let mut c = 0;
        for &p in trace.enabled_at(idx) {
            pending[p] = true;
            c += 1;
        }
        c
    };
    left += start(0, &mut pending);
    if left == 0 {
        return boundaries;
    }
    for (i, t) in trace.transitions().iter().enumerate() {
        for &p in t.selected.iter().chain(&t.neutralized) {
            if pending[p] {
                pending[p] = false;
                left -= 1;
            }
        }
        if left == 0 {
            boundaries.push(i + 1);
            left = start(i + 1, &mut pending);
            if left == 0 {
                break;
            }
        }
    }
    boundaries
}

/// Number of rounds needed to reach configuration `index`: the count of
/// complete rounds ending at or before it, plus one if it lies strictly
/// inside a round.
pub fn rounds_to(boundaries: &[usize], index: usize) -> usize {
    let done = boundaries.partition_point(|&b| b <= index);
    let on_boundary = index == 0 || (done > 0 && boundaries[done - 1] == index);
    if on_boundary {
        done
    } else {
        done + 1
    }
}
