//! Solution files: a JSON array of `{id, offset, waypoints: [[i, j], ...]}`.

use serde::{Deserialize, Serialize};

use crate::conflicts::PSolution;
use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::planners::Path;
use crate::resolution::SolutionSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Entry {
    id: usize,
    offset: f64,
    waypoints: Vec<[i32; 2]>,
}

pub fn write_solution(ps: &SolutionSet) -> Result<String> {
    let entries: Vec<Entry> = ps
        .psolutions
        .iter()
        .map(|p| Entry {
            id: p.agent_id,
            offset: p.offset,
            waypoints: p.path.waypoints().into_iter().map(|c| [c.i, c.j]).collect(),
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&entries)?;
    s.push('\n');
    Ok(s)
}

pub fn read_solution(text: &str) -> Result<SolutionSet> {
    let entries: Vec<Entry> = serde_json::from_str(text)?;
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        if e.waypoints.len() < 2 {
            return Err(Error::Solution(format!(
                "agent {} has fewer than two waypoints",
                e.id
            )));
        }
        if !(e.offset.is_finite() && e.offset >= 0.0) {
            return Err(Error::Solution(format!(
                "agent {} has invalid offset {}",
                e.id, e.offset
            )));
        }
        let cells: Vec<Cell> = e.waypoints.iter().map(|&[i, j]| Cell::new(i, j)).collect();
        let path = Path::from_waypoints(&cells)
            .map_err(|err| Error::Solution(format!("agent {}: {err}", e.id)))?;
        out.push(PSolution::new(e.id, path).with_offset(e.offset));
    }
    SolutionSet::new(out).map_err(|err| Error::Solution(err.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let p = |id, pts: &[(i32, i32)], off| {
            let cells: Vec<Cell> = pts.iter().copied().map(Cell::from).collect();
            PSolution::new(id, Path::from_waypoints(&cells).unwrap()).with_offset(off)
        };
        let ps = SolutionSet::new(vec![
            p(0, &[(0, 0), (3, 4), (3, 9)], 0.0),
            p(4, &[(7, 7), (2, 2)], 5.0),
        ])
        .unwrap();
        let text = write_solution(&ps).unwrap();
        assert_eq!(read_solution(&text).unwrap(), ps);
        assert!(text.contains("\"waypoints\""));
    }

    #[test]
    fn rejects_malformed() {
        assert!(read_solution("{").is_err());
        assert!(read_solution(r#"[{"id":0,"offset":0,"waypoints":[[1,1]]}]"#).is_err());
        assert!(read_solution(r#"[{"id":0,"offset":-1,"waypoints":[[1,1],[2,2]]}]"#).is_err());
        assert!(read_solution(r#"[{"id":0,"offset":0,"waypoints":[[1,1],[1,1]]}]"#).is_err());
        let dup = r#"[{"id":0,"offset":0,"waypoints":[[1,1],[2,2]]},{"id":0,"offset":0,"waypoints":[[3,3],[2,2]]}]"#;
        assert!(read_solution(dup).is_err());
    }
}
