//! Actor output over the position × velocity box, for heat maps.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::{CarState, EnvConfig, Mlp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub position: f64,
    pub velocity: f64,
    pub action: f64,
}

fn linspace(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

/// Evaluates `actor` on a `resolution × resolution` grid spanning
/// `[min_position, goal_position] × [−max_speed, max_speed]`, position
/// varying slowest. Inputs go through the config's observation map.
pub fn export_policy_grid(actor: &Mlp, resolution: usize, env: &EnvConfig) -> Result<Vec<GridPoint>> {
    if resolution < 2 {
        return Err(Error::Config(format!("grid resolution must be at least 2, got {resolution}")));
    }
    let obs = env.observation_map();
    let mut trace = actor.trace();
    let mut out = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        let position = linspace(env.min_position, env.goal_position, resolution, i);
        for j in 0..resolution {
            let velocity = linspace(-env.max_speed, env.max_speed, resolution, j);
            actor.forward_into(&obs.observe(&CarState::new(position, velocity)), None, &mut trace)?;
            out.push(GridPoint { position, velocity, action: trace.output()[0] });
        }
    }
    Ok(out)
}

pub fn grid_to_csv(points: &[GridPoint]) -> String {
    let mut s = String::from("position,velocity,action\n");
    for p in points {
        let _ = writeln!(s, "{:?},{:?},{:?}", p.position, p.velocity, p.action);
    }
    s
}

pub fn write_grid_csv(points: &[GridPoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, grid_to_csv(points)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddpg::actor_network;

    #[test]
    fn zero_actor_gives_zero_everywhere() {
        let mut a: Mlp = actor_network((5, 5), 0).unwrap();
        a.params_mut().fill(0.0);
        let g = export_policy_grid(&a, 7, &EnvConfig::default()).unwrap();
        assert_eq!(g.len(), 49);
        assert!(g.iter().all(|p| p.action == 0.0));
    }

    #[test]
    fn corners_sit_on_the_box() {
        let a: Mlp = actor_network((5, 5), 1).unwrap();
        let g = export_policy_grid(&a, 3, &EnvConfig::default()).unwrap();
        assert_eq!(g.len(), 9);
        let corner = |k: usize| (g[k].position, g[k].velocity);
        assert_eq!(corner(0), (-1.2, -0.07));
        assert_eq!(corner(2), (-1.2, 0.07));
        assert_eq!(corner(6), (0.45, -0.07));
        assert_eq!(corner(8), (0.45, 0.07));
        assert_eq!(corner(4), (-0.375, 0.0));
        assert!(grid_to_csv(&g).starts_with("position,velocity,action\n-1.2,-0.07,"));
        assert!(export_policy_grid(&a, 1, &EnvConfig::default()).is_err());
    }
}
