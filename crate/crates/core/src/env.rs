//! Frogger-style gridworld: map construction, deterministic one-step dynamics,
//! solvability search, and exhaustive transition enumeration.
//!
//! Geometry is fixed by the river-row count `K`: the grid has `H = 2K + 3` rows
//! with row 0 the goal, rows `1..=K` river, row `K+1` the median, rows
//! `K+2..=2K+1` road, and row `2K+2` the start. Every river and road row
//! carries a base occupancy pattern (log or car columns at phase 0) that
//! shifts one cell per tick with wraparound, so the global layout phase lives
//! in `Z_W`.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Attempts `generate_map` makes before concluding the density is too high.
pub const RETRY_BUDGET: usize = 1000;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid map parameter: {0}")]
    InvalidParameter(String),
    #[error("no solvable map found for density {density} after {attempts} attempts")]
    RetryBudgetExhausted { density: f64, attempts: usize },
    #[error("action {action:?} moves off-grid from ({x}, {y})")]
    IllegalAction { x: usize, y: usize, action: Action },
    #[error("malformed map text (line {line}): {msg}")]
    MapFormat { line: usize, msg: String },
}

/// Row band within the fixed goal/river/median/road/start layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    Goal,
    River,
    Median,
    Road,
    Start,
}

impl Band {
    pub fn glyph(self) -> char {
        match self {
            Band::Goal => 'G',
            Band::River => 'W',
            Band::Median => 'M',
            Band::Road => 'R',
            Band::Start => 'S',
        }
    }
}

/// Drift direction of a moving row; obstacles shift one cell per tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dir {
    Left,
    Right,
}

impl Dir {
    pub fn offset(self) -> isize {
        match self {
            Dir::Left => -1,
            Dir::Right => 1,
        }
    }

    pub fn glyph(self) -> char {
        match self {
            Dir::Left => 'L',
            Dir::Right => 'R',
        }
    }
}

/// The five agent moves. `Stay` moves zero cells; the world still ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Stay,
    ];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Stay => (0, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::Stay => "stay",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.name() == name)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Terminal classification of standing at a cell at a given phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Alive,
    DeadCar,
    DeadWater,
    Goal,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Alive => "alive",
            Outcome::DeadCar => "dead_car",
            Outcome::DeadWater => "dead_water",
            Outcome::Goal => "goal",
        }
    }
}

/// Agent coordinates, always inside grid bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AgentState {
    pub x: usize,
    pub y: usize,
}

/// Base occupancy pattern of one moving row at phase 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MovingRow {
    pub row: usize,
    pub dir: Dir,
    /// Occupied columns at phase 0, sorted ascending, no duplicates.
    pub base: Vec<usize>,
}

/// One state-action-state transition with deterministic dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub s1: AgentState,
    pub phase1: usize,
    pub action: Action,
    pub s2: AgentState,
    pub phase2: usize,
    pub outcome: Outcome,
}

impl Triple {
    /// Canonical identifier: `x1,y1,t,action,x2,y2`.
    pub fn id(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.s1.x, self.s1.y, self.phase1, self.action, self.s2.x, self.s2.y
        )
    }
}

/// Result of applying one action: post-move agent, advanced phase, outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepResult {
    pub state: AgentState,
    pub phase: usize,
    pub outcome: Outcome,
}

/// Static map plan: band layout plus per-moving-row base patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width: usize,
    river_rows: usize,
    density: f64,
    seed: u64,
    map_id: String,
    /// Keyed by row index; only river and road rows appear.
    moving: Vec<MovingRow>,
    /// Occupancy bitmask per moving row, parallel to `moving`.
    masks: Vec<u64>,
    /// row -> index into `moving`, or usize::MAX.
    row_lookup: Vec<usize>,
}

impl GridMap {
    /// Builds a map from explicit parts, validating the structural
    /// invariants. Does not require solvability; `generate_map` does.
    pub fn new(
        width: usize,
        river_rows: usize,
        density: f64,
        seed: u64,
        moving: Vec<MovingRow>,
    ) -> Result<GridMap, EnvError> {
        if width < 3 || width > 64 {
            return Err(EnvError::InvalidParameter(format!(
                "width must be in 3..=64, got {width}"
            )));
        }
        if !(0.0..=1.0).contains(&density) {
            return Err(EnvError::InvalidParameter(format!(
                "density must be in [0, 1], got {density}"
            )));
        }
        let k = river_rows;
        let height = 2 * k + 3;
        let expected = (density * width as f64).round() as usize;
        let mut seen = vec![false; height];
        for m in &moving {
            let band = band_of(m.row, k, height);
            if band != Band::River && band != Band::Road {
                return Err(EnvError::InvalidParameter(format!(
                    "row {} is not a moving row",
                    m.row
                )));
            }
            if seen[m.row] {
                return Err(EnvError::InvalidParameter(format!(
                    "duplicate moving row {}",
                    m.row
                )));
            }
            seen[m.row] = true;
            if m.base.windows(2).any(|w| w[0] >= w[1]) {
                return Err(EnvError::InvalidParameter(format!(
                    "row {} base columns must be sorted and distinct",
                    m.row
                )));
            }
            if m.base.iter().any(|&c| c >= width) {
                return Err(EnvError::InvalidParameter(format!(
                    "row {} has base column outside width {width}",
                    m.row
                )));
            }
            if m.base.len() != expected {
                return Err(EnvError::InvalidParameter(format!(
                    "row {} has {} occupied columns, expected round({density}*{width}) = {expected}",
                    m.row,
                    m.base.len()
                )));
            }
        }
        for row in 0..height {
            let band = band_of(row, k, height);
            if (band == Band::River || band == Band::Road) && !seen[row] {
                return Err(EnvError::InvalidParameter(format!(
                    "moving row {row} has no base pattern"
                )));
            }
        }
        let mut moving = moving;
        moving.sort_by_key(|m| m.row);
        let masks = moving
            .iter()
            .map(|m| m.base.iter().fold(0u64, |acc, &c| acc | (1 << c)))
            .collect();
        let mut row_lookup = vec![usize::MAX; height];
        for (i, m) in moving.iter().enumerate() {
            row_lookup[m.row] = i;
        }
        let map_id = format!("w{width}k{k}d{density}s{seed}");
        Ok(GridMap {
            width,
            river_rows: k,
            density,
            seed,
            map_id,
            moving,
            masks,
            row_lookup,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        2 * self.river_rows + 3
    }

    pub fn river_rows(&self) -> usize {
        self.river_rows
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn map_id(&self) -> &str {
        &self.map_id
    }

    pub fn goal_row(&self) -> usize {
        0
    }

    pub fn median_row(&self) -> usize {
        self.river_rows + 1
    }

    pub fn start_row(&self) -> usize {
        2 * self.river_rows + 2
    }

    pub fn band(&self, row: usize) -> Band {
        band_of(row, self.river_rows, self.height())
    }

    pub fn is_moving_row(&self, row: usize) -> bool {
        row < self.row_lookup.len() && self.row_lookup[row] != usize::MAX
    }

    pub fn moving_rows(&self) -> &[MovingRow] {
        &self.moving
    }

    pub fn dir(&self, row: usize) -> Option<Dir> {
        self.moving_index(row).map(|i| self.moving[i].dir)
    }

    pub fn base(&self, row: usize) -> Option<&[usize]> {
        self.moving_index(row).map(|i| self.moving[i].base.as_slice())
    }

    fn moving_index(&self, row: usize) -> Option<usize> {
        if self.is_moving_row(row) {
            Some(self.row_lookup[row])
        } else {
            None
        }
    }

    /// Whether `(row, col)` holds an obstacle (car or log) at `phase`.
    /// Non-moving rows are always empty.
    pub fn occupied(&self, row: usize, col: usize, phase: usize) -> bool {
        match self.moving_index(row) {
            None => false,
            Some(i) => {
                let w = self.width as isize;
                let off = self.moving[i].dir.offset();
                // Pattern shifts by `off` per tick, so the base column that
                // lands on `col` at `phase` is `col - off*phase (mod W)`.
                let base_col =
                    (col as isize - off * (phase % self.width) as isize).rem_euclid(w) as usize;
                (self.masks[i] >> base_col) & 1 == 1
            }
        }
    }

    /// Classifies standing at `(x, y)` at `phase`, before any action.
    pub fn state_outcome(&self, x: usize, y: usize, phase: usize) -> Outcome {
        match self.band(y) {
            Band::Goal => Outcome::Goal,
            Band::Road => {
                if self.occupied(y, x, phase) {
                    Outcome::DeadCar
                } else {
                    Outcome::Alive
                }
            }
            Band::River => {
                if self.occupied(y, x, phase) {
                    Outcome::Alive
                } else {
                    Outcome::DeadWater
                }
            }
            Band::Median | Band::Start => Outcome::Alive,
        }
    }

    /// Actions that keep the agent on the grid from `(x, y)`.
    pub fn legal_actions(&self, x: usize, y: usize) -> impl Iterator<Item = Action> + '_ {
        let (w, h) = (self.width as isize, self.height() as isize);
        Action::ALL.into_iter().filter(move |a| {
            let (dx, dy) = a.delta();
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            (0..w).contains(&nx) && (0..h).contains(&ny)
        })
    }

    /// Serializes to the map text format: a `W H K density seed` header,
    /// `H` band lines of `W` glyphs, then one `row dir cols` line per
    /// moving row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            self.width,
            self.height(),
            self.river_rows,
            self.density,
            self.seed
        ));
        for row in 0..self.height() {
            let glyph = self.band(row).glyph();
            for _ in 0..self.width {
                out.push(glyph);
            }
            out.push('\n');
        }
        for m in &self.moving {
            let cols: Vec<String> = m.base.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("{} {} {}\n", m.row, m.dir.glyph(), cols.join(",")));
        }
        out
    }

    /// Parses the `to_text` format, revalidating every invariant.
    pub fn from_text(text: &str) -> Result<GridMap, EnvError> {
        let err = |line: usize, msg: &str| EnvError::MapFormat {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(1, "header must be `W H K density seed`"));
        }
        let width: usize = fields[0].parse().map_err(|_| err(1, "bad width"))?;
        let height: usize = fields[1].parse().map_err(|_| err(1, "bad height"))?;
        let k: usize = fields[2].parse().map_err(|_| err(1, "bad river row count"))?;
        let density: f64 = fields[3].parse().map_err(|_| err(1, "bad density"))?;
        let seed: u64 = fields[4].parse().map_err(|_| err(1, "bad seed"))?;
        if height != 2 * k + 3 {
            return Err(err(1, "height must equal 2K + 3"));
        }
        for row in 0..height {
            let (n, line) = lines.next().ok_or_else(|| err(row + 2, "missing band line"))?;
            let expect = band_of(row, k, height).glyph();
            if line.len() != width || line.chars().any(|c| c != expect) {
                return Err(err(n + 1, &format!("band line must be {width} '{expect}' glyphs")));
            }
        }
        let mut moving = Vec::new();
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(n + 1, "moving row line must be `row dir cols`"));
            }
            let row: usize = fields[0].parse().map_err(|_| err(n + 1, "bad row index"))?;
            let dir = match fields[1] {
                "L" => Dir::Left,
                "R" => Dir::Right,
                _ => return Err(err(n + 1, "dir must be L or R")),
            };
            let base: Result<Vec<usize>, _> = fields[2].split(',').map(|c| c.parse()).collect();
            let base = base.map_err(|_| err(n + 1, "bad column list"))?;
            moving.push(MovingRow { row, dir, base });
        }
        GridMap::new(width, k, density, seed, moving)
    }
}

fn band_of(row: usize, k: usize, height: usize) -> Band {
    debug_assert!(row < height);
    if row == 0 {
        Band::Goal
    } else if row <= k {
        Band::River
    } else if row == k + 1 {
        Band::Median
    } else if row <= 2 * k + 1 {
        Band::Road
    } else {
        Band::Start
    }
}

/// Samples maps at `density` until one passes `is_solvable`, drawing each
/// candidate's occupancy patterns from the next RNG stream of `seed`.
pub fn generate_map(
    width: usize,
    river_rows: usize,
    density: f64,
    seed: u64,
) -> Result<GridMap, EnvError> {
    if river_rows < 1 {
        return Err(EnvError::InvalidParameter(
            "river_rows must be at least 1".into(),
        ));
    }
    if !(density > 0.0 && density < 1.0) {
        return Err(EnvError::InvalidParameter(format!(
            "density must be in (0, 1), got {density}"
        )));
    }
    if width < 3 {
        return Err(EnvError::InvalidParameter(format!(
            "width must be at least 3, got {width}"
        )));
    }
    let k = river_rows;
    let height = 2 * k + 3;
    let count = (density * width as f64).round() as usize;
    for attempt in 0..RETRY_BUDGET {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let mut moving = Vec::new();
        for row in 1..height {
            let band = band_of(row, k, height);
            if band != Band::River && band != Band::Road {
                continue;
            }
            // Direction alternates within each band, starting Left.
            let band_pos = if band == Band::River { row - 1 } else { row - (k + 2) };
            let dir = if band_pos % 2 == 0 { Dir::Left } else { Dir::Right };
            let mut base = rand::seq::index::sample(&mut rng, width, count).into_vec();
            base.sort_unstable();
            moving.push(MovingRow { row, dir, base });
        }
        let map = GridMap::new(width, k, density, seed, moving)?;
        if is_solvable(&map) {
            return Ok(map);
        }
    }
    Err(EnvError::RetryBudgetExhausted {
        density,
        attempts: RETRY_BUDGET,
    })
}

/// Applies one action from an alive state: the agent moves, the world ticks,
/// river rows carry the agent one cell with the current, then the outcome is
/// read off the final cell. Off-grid moves are rejected; off-grid carriage is
/// death by water (reported at the last in-grid cell).
pub fn step(
    map: &GridMap,
    state: AgentState,
    phase: usize,
    action: Action,
) -> Result<StepResult, EnvError> {
    let (dx, dy) = action.delta();
    let nx = state.x as isize + dx;
    let ny = state.y as isize + dy;
    if nx < 0 || nx >= map.width() as isize || ny < 0 || ny >= map.height() as isize {
        return Err(EnvError::IllegalAction {
            x: state.x,
            y: state.y,
            action,
        });
    }
    let (nx, ny) = (nx as usize, ny as usize);
    let phase2 = (phase + 1) % map.width();
    if map.band(ny) == Band::River {
        let carried = nx as isize + map.dir(ny).expect("river rows move").offset();
        if carried < 0 || carried >= map.width() as isize {
            return Ok(StepResult {
                state: AgentState { x: nx, y: ny },
                phase: phase2,
                outcome: Outcome::DeadWater,
            });
        }
        let cx = carried as usize;
        return Ok(StepResult {
            state: AgentState { x: cx, y: ny },
            phase: phase2,
            outcome: map.state_outcome(cx, ny, phase2),
        });
    }
    Ok(StepResult {
        state: AgentState { x: nx, y: ny },
        phase: phase2,
        outcome: map.state_outcome(nx, ny, phase2),
    })
}

/// A solvability certificate: start column plus the action sequence that
/// reaches the goal row from phase 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub start_x: usize,
    pub actions: Vec<Action>,
}

/// Breadth-first search over `(x, y, phase)` for a path from some start-row
/// cell at phase 0 to the goal row, with every intermediate node alive.
/// Returns the first (shortest) witness found, or `None`.
pub fn solve_witness(map: &GridMap) -> Option<Witness> {
    let start_row = map.start_row();
    let mut parents: HashMap<(usize, usize, usize), ((usize, usize, usize), Action)> =
        HashMap::new();
    let mut queue = VecDeque::new();
    for x in 0..map.width() {
        queue.push_back((x, start_row, 0usize));
        parents.insert((x, start_row, 0), ((x, start_row, 0), Action::Stay));
    }
    let starts: Vec<(usize, usize, usize)> =
        (0..map.width()).map(|x| (x, start_row, 0)).collect();
    while let Some((x, y, t)) = queue.pop_front() {
        for action in map.legal_actions(x, y) {
            let r = step(map, AgentState { x, y }, t, action).expect("legal action");
            match r.outcome {
                Outcome::Goal => {
                    // Walk parents back to a start node.
                    let mut actions = vec![action];
                    let mut node = (x, y, t);
                    while !starts.contains(&node) {
                        let (prev, a) = parents[&node];
                        actions.push(a);
                        node = prev;
                    }
                    actions.reverse();
                    return Some(Witness {
                        start_x: node.0,
                        actions,
                    });
                }
                Outcome::Alive => {
                    let key = (r.state.x, r.state.y, r.phase);
                    if !parents.contains_key(&key) {
                        parents.insert(key, ((x, y, t), action));
                        queue.push_back(key);
                    }
                }
                Outcome::DeadCar | Outcome::DeadWater => {}
            }
        }
    }
    None
}

/// Whether the map can be completed from at least one start-row cell at
/// phase 0.
pub fn is_solvable(map: &GridMap) -> bool {
    solve_witness(map).is_some()
}

/// Replays a witness through `step`, checking every prefix stays alive and
/// the final action reaches the goal.
pub fn replay_witness(map: &GridMap, witness: &Witness) -> Result<(), EnvError> {
    let mut state = AgentState {
        x: witness.start_x,
        y: map.start_row(),
    };
    let mut phase = 0;
    for (i, &action) in witness.actions.iter().enumerate() {
        let r = step(map, state, phase, action)?;
        let last = i + 1 == witness.actions.len();
        match r.outcome {
            Outcome::Goal if last => return Ok(()),
            Outcome::Alive if !last => {
                state = r.state;
                phase = r.phase;
            }
            other => {
                return Err(EnvError::InvalidParameter(format!(
                    "witness replay broke at move {i} with outcome {:?}",
                    other
                )))
            }
        }
    }
    Err(EnvError::InvalidParameter(
        "witness has no goal-reaching move".into(),
    ))
}

/// Enumerates one triple per (alive cell, phase, legal action), ordered
/// row-major by position, then phase, then action enum order.
pub fn enumerate_triples(map: &GridMap) -> Vec<Triple> {
    let mut out = Vec::new();
    for y in 0..map.height() {
        for x in 0..map.width() {
            for t in 0..map.width() {
                if map.state_outcome(x, y, t) != Outcome::Alive {
                    continue;
                }
                for action in map.legal_actions(x, y) {
                    let s1 = AgentState { x, y };
                    let r = step(map, s1, t, action).expect("legal action");
                    out.push(Triple {
                        s1,
                        phase1: t,
                        action,
                        s2: r.state,
                        phase2: r.phase,
                        outcome: r.outcome,
                    });
                }
            }
        }
    }
    out
}
