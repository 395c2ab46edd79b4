//! Pixel key-door gridworld: the agent must pick up a key and open a door.
//! Walls block movement (moves into them are inapplicable, like actions with
//! unsatisfied preconditions), and so does the door while the key is not
//! held. Observations are 84×84×3 images rendered from the grid; features
//! come from tile discretization of the image, with an analytic fast path
//! that computes tile means without rasterizing.

use super::tiles::{tile_discretize, TileFeatureMap};
use super::{DeterministicEnv, FeatureMap, SimulatorError, Transition};
use crate::novelty::{FeatureSchema, FeatureVector};

pub const OBS_SIZE: usize = 84;
pub const OBS_CHANNELS: usize = 3;

const COLOR_AGENT: [u8; 3] = [0, 0, 255];
const COLOR_KEY: [u8; 3] = [255, 0, 0];
const COLOR_DOOR: [u8; 3] = [0, 255, 0];
const COLOR_WALL: [u8; 3] = [128, 128, 128];
const COLOR_EMPTY: [u8; 3] = [0, 0, 0];

/// Row-major interleaved intensity image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> u8 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: u8) {
        self.data[(row * self.width + col) * self.channels + channel] = value;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridStatus {
    Running,
    /// Reached the door while holding the key; episode over with reward +1.
    DoorOpened,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridworldState {
    pub pos: (u8, u8),
    pub has_key: bool,
    pub steps: u32,
    pub status: GridStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Empty,
    Wall,
    Key,
    Door,
}

pub const GW_UP: usize = 0;
pub const GW_DOWN: usize = 1;
pub const GW_LEFT: usize = 2;
pub const GW_RIGHT: usize = 3;

#[derive(Debug, Clone)]
pub struct GridworldEnv {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
    start: (u8, u8),
    step_cap: u32,
}

impl GridworldEnv {
    /// Parses an ASCII map: `#` wall, `.` empty, `K` key, `D` door, `S`
    /// start; one character per cell, one row per line. Requires exactly one
    /// each of K, D, S and a rectangular shape.
    pub fn from_ascii(map: &str, step_cap: u32) -> Result<Self, SimulatorError> {
        let mut cells = Vec::new();
        let mut start = None;
        let mut key = false;
        let mut door = false;
        let mut cols = None;
        let mut rows = 0usize;
        for (line_no, line) in map.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let row_cells: Vec<Cell> = line
                .chars()
                .enumerate()
                .map(|(col, ch)| match ch {
                    '#' => Ok(Cell::Wall),
                    '.' => Ok(Cell::Empty),
                    'K' => {
                        if key {
                            return Err(SimulatorError::MapParse {
                                line: line_no + 1,
                                message: "duplicate key".into(),
                            });
                        }
                        key = true;
                        Ok(Cell::Key)
                    }
                    'D' => {
                        if door {
                            return Err(SimulatorError::MapParse {
                                line: line_no + 1,
                                message: "duplicate door".into(),
                            });
                        }
                        door = true;
                        Ok(Cell::Door)
                    }
                    'S' => {
                        if start.is_some() {
                            return Err(SimulatorError::MapParse {
                                line: line_no + 1,
                                message: "duplicate start".into(),
                            });
                        }
                        start = Some((rows as u8, col as u8));
                        Ok(Cell::Empty)
                    }
                    other => Err(SimulatorError::MapParse {
                        line: line_no + 1,
                        message: format!("unknown cell character `{other}`"),
                    }),
                })
                .collect::<Result<_, _>>()?;
            match cols {
                None => cols = Some(row_cells.len()),
                Some(c) if c != row_cells.len() => {
                    return Err(SimulatorError::MapParse {
                        line: line_no + 1,
                        message: format!("row width {} differs from {}", row_cells.len(), c),
                    });
                }
                _ => {}
            }
            cells.extend(row_cells);
            rows += 1;
        }
        let cols = cols.ok_or_else(|| SimulatorError::InvalidMap("empty map".into()))?;
        if rows > 255 || cols > 255 {
            return Err(SimulatorError::InvalidMap("map larger than 255x255".into()));
        }
        let start = start.ok_or_else(|| SimulatorError::InvalidMap("missing start S".into()))?;
        if !key {
            return Err(SimulatorError::InvalidMap("missing key K".into()));
        }
        if !door {
            return Err(SimulatorError::InvalidMap("missing door D".into()));
        }
        Ok(Self {
            rows,
            cols,
            cells,
            start,
            step_cap,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn step_cap(&self) -> u32 {
        self.step_cap
    }

    fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.cols + col]
    }

    /// Pixel boundary of cell rows: cell r covers [bound(r), bound(r+1)).
    fn cell_row_bound(&self, r: usize) -> usize {
        r * OBS_SIZE / self.rows
    }

    fn cell_col_bound(&self, c: usize) -> usize {
        c * OBS_SIZE / self.cols
    }

    fn cell_color(&self, state: &GridworldState, row: usize, col: usize) -> [u8; 3] {
        if state.pos == (row as u8, col as u8) {
            return COLOR_AGENT;
        }
        match self.cell(row, col) {
            Cell::Wall => COLOR_WALL,
            Cell::Key if !state.has_key => COLOR_KEY,
            Cell::Key => COLOR_EMPTY,
            Cell::Door => COLOR_DOOR,
            Cell::Empty => COLOR_EMPTY,
        }
    }

    /// Renders the 84×84×3 observation for a state.
    pub fn render(&self, state: &GridworldState) -> Image {
        let mut image = Image::filled(OBS_SIZE, OBS_SIZE, OBS_CHANNELS, 0);
        for row in 0..self.rows {
            for col in 0..self.cols {
                let color = self.cell_color(state, row, col);
                for pr in self.cell_row_bound(row)..self.cell_row_bound(row + 1) {
                    for pc in self.cell_col_bound(col)..self.cell_col_bound(col + 1) {
                        for (ch, &value) in color.iter().enumerate() {
                            image.set(pr, pc, ch, value);
                        }
                    }
                }
            }
        }
        image
    }
}

impl DeterministicEnv for GridworldEnv {
    type State = GridworldState;

    fn action_count(&self) -> usize {
        4
    }

    fn initial_state(&self) -> GridworldState {
        GridworldState {
            pos: self.start,
            has_key: false,
            steps: 0,
            status: GridStatus::Running,
        }
    }

    fn step(&self, state: &GridworldState, action: usize) -> Option<Transition<GridworldState>> {
        if action >= 4 || self.is_terminal(state) {
            return None;
        }
        let (row, col) = (state.pos.0 as i32, state.pos.1 as i32);
        let (tr, tc) = match action {
            GW_UP => (row - 1, col),
            GW_DOWN => (row + 1, col),
            GW_LEFT => (row, col - 1),
            GW_RIGHT => (row, col + 1),
            _ => unreachable!(),
        };
        // off-grid counts as a wall; walls block the move entirely
        let out_of_bounds =
            tr < 0 || tc < 0 || tr as usize >= self.rows || tc as usize >= self.cols;
        if out_of_bounds || self.cell(tr as usize, tc as usize) == Cell::Wall {
            return None;
        }
        let (tr, tc) = (tr as usize, tc as usize);
        let mut next = *state;
        next.steps += 1;
        next.pos = (tr as u8, tc as u8);
        match self.cell(tr, tc) {
            Cell::Door => {
                if !state.has_key {
                    // locked: the move is inapplicable, like a wall
                    return None;
                }
                next.status = GridStatus::DoorOpened;
                return Some(Transition {
                    state: next,
                    reward: 1.0,
                });
            }
            Cell::Key => next.has_key = true,
            _ => {}
        }
        Some(Transition {
            state: next,
            reward: 0.0,
        })
    }

    fn is_terminal(&self, state: &GridworldState) -> bool {
        state.status != GridStatus::Running || state.steps >= self.step_cap
    }

    fn is_goal(&self, state: &GridworldState) -> bool {
        state.status == GridStatus::DoorOpened
    }
}

/// Tile feature map over gridworld states. Computes exactly the same values
/// as `tile_discretize(render(state))`, but analytically from cell/tile
/// overlap areas, avoiding rasterization.
#[derive(Debug, Clone)]
pub struct GridTileFeatures {
    tiles: TileFeatureMap,
    /// row_overlap[tile_row][cell_row] = shared pixel rows.
    row_overlap: Vec<Vec<u64>>,
    col_overlap: Vec<Vec<u64>>,
    /// Pixels per tile (rows × cols), for mean denominators.
    tile_area: Vec<u64>,
}

impl GridTileFeatures {
    pub fn new(env: &GridworldEnv, tiles: TileFeatureMap) -> Self {
        let tile_rows = tiles.row_bounds(OBS_SIZE);
        let tile_cols = tiles.col_bounds(OBS_SIZE);
        let overlap = |a0: usize, a1: usize, b0: usize, b1: usize| -> u64 {
            (a1.min(b1)).saturating_sub(a0.max(b0)) as u64
        };
        let row_overlap: Vec<Vec<u64>> = (0..tiles.rows())
            .map(|t| {
                (0..env.rows)
                    .map(|r| {
                        overlap(
                            tile_rows[t],
                            tile_rows[t + 1],
                            env.cell_row_bound(r),
                            env.cell_row_bound(r + 1),
                        )
                    })
                    .collect()
            })
            .collect();
        let col_overlap: Vec<Vec<u64>> = (0..tiles.cols())
            .map(|t| {
                (0..env.cols)
                    .map(|c| {
                        overlap(
                            tile_cols[t],
                            tile_cols[t + 1],
                            env.cell_col_bound(c),
                            env.cell_col_bound(c + 1),
                        )
                    })
                    .collect()
            })
            .collect();
        let mut tile_area = Vec::with_capacity(tiles.rows() * tiles.cols());
        for tr in 0..tiles.rows() {
            for tc in 0..tiles.cols() {
                let h = (tile_rows[tr + 1] - tile_rows[tr]) as u64;
                let w = (tile_cols[tc + 1] - tile_cols[tc]) as u64;
                tile_area.push(h * w);
            }
        }
        Self {
            tiles,
            row_overlap,
            col_overlap,
            tile_area,
        }
    }

    pub fn tiles(&self) -> &TileFeatureMap {
        &self.tiles
    }

    fn analytic_features(&self, env: &GridworldEnv, state: &GridworldState) -> FeatureVector {
        let mut values = Vec::with_capacity(self.tiles.rows() * self.tiles.cols());
        for tr in 0..self.tiles.rows() {
            for tc in 0..self.tiles.cols() {
                let mut total: u64 = 0;
                for (cr, &rov) in self.row_overlap[tr].iter().enumerate() {
                    if rov == 0 {
                        continue;
                    }
                    for (cc, &cov) in self.col_overlap[tc].iter().enumerate() {
                        if cov == 0 {
                            continue;
                        }
                        let color = env.cell_color(state, cr, cc);
                        let sum = color.iter().map(|&v| v as u64).sum::<u64>();
                        total += rov * cov * sum;
                    }
                }
                let count = self.tile_area[tr * self.tiles.cols() + tc] * OBS_CHANNELS as u64;
                let mean = if count == 0 {
                    0.0
                } else {
                    total as f64 / count as f64
                };
                values.push(self.tiles.quantize(mean));
            }
        }
        FeatureVector(values)
    }
}

/// A gridworld paired with its tile feature map; the unit planners operate
/// on.
#[derive(Debug, Clone)]
pub struct BoundGridFeatures {
    env: GridworldEnv,
    map: GridTileFeatures,
}

impl BoundGridFeatures {
    pub fn new(env: GridworldEnv, tiles: TileFeatureMap) -> Self {
        let map = GridTileFeatures::new(&env, tiles);
        Self { env, map }
    }
}

impl FeatureMap<GridworldState> for BoundGridFeatures {
    fn schema(&self) -> &FeatureSchema {
        self.map.tiles.schema()
    }

    fn features(&self, state: &GridworldState) -> FeatureVector {
        self.map.analytic_features(&self.env, state)
    }
}

/// Reference path: rasterize then discretize. Used to validate the analytic
/// path and available for debugging.
pub fn rendered_features(
    env: &GridworldEnv,
    tiles: &TileFeatureMap,
    state: &GridworldState,
) -> FeatureVector {
    tile_discretize(&env.render(state), tiles).expect("84x84 image is nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAP: &str = "\
#######
#S....#
#.###.#
#...K.#
#.#####
#D....#
#######
";

    fn env() -> GridworldEnv {
        GridworldEnv::from_ascii(MAP, 200).unwrap()
    }

    #[test]
    fn parse_shape_and_start() {
        let env = env();
        assert_eq!(env.rows(), 7);
        assert_eq!(env.cols(), 7);
        assert_eq!(env.initial_state().pos, (1, 1));
    }

    #[test]
    fn parse_rejects_malformed_maps() {
        assert!(GridworldEnv::from_ascii("", 10).is_err());
        assert!(GridworldEnv::from_ascii("SKD\n##", 10).is_err()); // ragged
        assert!(GridworldEnv::from_ascii("S.K", 10).is_err()); // no door
        assert!(GridworldEnv::from_ascii("SKDK", 10).is_err()); // two keys
        assert!(GridworldEnv::from_ascii("SKDX", 10).is_err()); // bad char
    }

    #[test]
    fn moves_into_walls_are_inapplicable() {
        let env = env();
        let s = env.initial_state(); // (1,1): walls above and to the left
        assert!(env.step(&s, GW_UP).is_none());
        assert!(env.step(&s, GW_LEFT).is_none());
        let t = env.step(&s, GW_RIGHT).unwrap();
        assert_eq!(t.state.pos, (1, 2));
        assert_eq!(t.reward, 0.0);
        assert_eq!(t.state.steps, 1);
    }

    #[test]
    fn out_of_range_actions_are_rejected() {
        let env = env();
        let s = env.initial_state();
        assert!(env.step(&s, 4).is_none());
    }

    #[test]
    fn key_pickup_then_door() {
        let env = env();
        let mut s = env.initial_state();
        // S(1,1) → (1,5) → down to (3,5) → left onto K(3,4)
        for a in [
            GW_RIGHT, GW_RIGHT, GW_RIGHT, GW_RIGHT, GW_DOWN, GW_DOWN, GW_LEFT,
        ] {
            s = env.step(&s, a).unwrap().state;
        }
        assert!(s.has_key);
        assert_eq!(s.pos, (3, 4));
        // back along the row to (3,1), then down to (4,1) above the door
        for a in [GW_LEFT, GW_LEFT, GW_LEFT, GW_DOWN] {
            s = env.step(&s, a).unwrap().state;
        }
        assert_eq!(s.pos, (4, 1));
        let t = env.step(&s, GW_DOWN).unwrap();
        assert_eq!(t.reward, 1.0);
        assert_eq!(t.state.status, GridStatus::DoorOpened);
        assert!(env.is_terminal(&t.state));
    }

    #[test]
    fn locked_door_blocks_until_the_key_is_held() {
        let env = env();
        let mut s = env.initial_state();
        for a in [GW_DOWN, GW_DOWN, GW_DOWN] {
            s = env.step(&s, a).unwrap().state;
        }
        assert_eq!(s.pos, (4, 1));
        assert!(!s.has_key);
        assert!(env.step(&s, GW_DOWN).is_none());
        assert_eq!(s.steps, 3);
    }

    #[test]
    fn step_cap_terminates_episode() {
        let env = GridworldEnv::from_ascii(MAP, 3).unwrap();
        let mut s = env.initial_state();
        for a in [GW_RIGHT, GW_LEFT, GW_RIGHT] {
            assert!(!env.is_terminal(&s));
            s = env.step(&s, a).unwrap().state;
        }
        assert!(env.is_terminal(&s));
        assert!(env.step(&s, GW_LEFT).is_none());
    }

    #[test]
    fn render_paints_expected_cell_colors() {
        let env = env();
        let s = env.initial_state();
        let image = env.render(&s);
        assert_eq!((image.height, image.width, image.channels), (84, 84, 3));
        // 7x7 cells, 12px each; sample cell centers
        let probe = |row: usize, col: usize| -> [u8; 3] {
            let (pr, pc) = (row * 12 + 6, col * 12 + 6);
            [
                image.get(pr, pc, 0),
                image.get(pr, pc, 1),
                image.get(pr, pc, 2),
            ]
        };
        assert_eq!(probe(0, 0), [128, 128, 128]); // wall
        assert_eq!(probe(1, 1), [0, 0, 255]); // agent
        assert_eq!(probe(3, 4), [255, 0, 0]); // key
        assert_eq!(probe(5, 1), [0, 255, 0]); // door
        assert_eq!(probe(1, 2), [0, 0, 0]); // empty
    }

    #[test]
    fn analytic_features_match_rendered_features() {
        let env = env();
        for tiles in [
            TileFeatureMap::new(2, 2, 256),
            TileFeatureMap::new(2, 2, 8),
            TileFeatureMap::new(4, 4, 32),
            TileFeatureMap::new(7, 7, 8),
            TileFeatureMap::new(3, 5, 16),
        ] {
            let bound = BoundGridFeatures::new(env.clone(), tiles.clone());
            // walk key -> door, comparing at every state along the way
            let mut s = env.initial_state();
            let script = [
                GW_RIGHT, GW_RIGHT, GW_RIGHT, GW_RIGHT, GW_DOWN, GW_DOWN, GW_LEFT, GW_LEFT,
                GW_LEFT, GW_LEFT, GW_UP, GW_DOWN, GW_DOWN, GW_DOWN,
            ];
            for &a in &script {
                assert_eq!(
                    bound.features(&s),
                    rendered_features(&env, &tiles, &s),
                    "tiles {}x{} q{}",
                    tiles.rows(),
                    tiles.cols(),
                    tiles.quantization_levels()
                );
                let t = env.step(&s, a).unwrap();
                s = t.state;
                if env.is_terminal(&s) {
                    break;
                }
            }
            assert_eq!(bound.features(&s), rendered_features(&env, &tiles, &s));
        }
    }

    #[test]
    fn within_tile_moves_leave_coarse_features_unchanged() {
        let env = env();
        let bound = BoundGridFeatures::new(env.clone(), TileFeatureMap::new(2, 2, 256));
        let s = env.initial_state(); // (1,1), fully inside tile (0,0): pixels 12..24
        let before = bound.features(&s);
        let t = env.step(&s, GW_RIGHT).unwrap(); // (1,2): pixels 24..36, same tile
        let after = bound.features(&t.state);
        assert_eq!(before, after);
    }
}
