//! The 5x5 lava grid navigation task.
//!
//! The agent state is `(x, y, d)` with `x` growing to the east, `y` growing
//! to the south and `d` the heading. Actions are forward, turn left and turn
//! right. Two extra absorbing states follow the grid states: one entered on
//! reaching the goal, one entered on touching lava.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{Dynamics, FiniteMdp, Policy, SaTable};

pub const WIDTH: usize = 5;
pub const HEIGHT: usize = 5;
pub const N_GRID_STATES: usize = WIDTH * HEIGHT * 4;
/// Absorbing state entered when the agent reaches the goal.
pub const GOAL_STATE: usize = N_GRID_STATES;
/// Terminal state entered when the agent touches lava.
pub const LAVA_STATE: usize = N_GRID_STATES + 1;
pub const N_STATES: usize = N_GRID_STATES + 2;
pub const N_ACTIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    North = 0,
    West = 1,
    East = 2,
    South = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::West, Direction::East, Direction::South];

    pub fn left(self) -> Self {
        match self {
            Direction::North => Direction::West,
            Direction::West => Direction::South,
            Direction::South => Direction::East,
            Direction::East => Direction::North,
        }
    }

    pub fn right(self) -> Self {
        match self {
            Direction::North => Direction::East,
            Direction::East => Direction::South,
            Direction::South => Direction::West,
            Direction::West => Direction::North,
        }
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Direction::North => (0, -1),
            Direction::West => (-1, 0),
            Direction::East => (1, 0),
            Direction::South => (0, 1),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Direction::North => 'N',
            Direction::West => 'W',
            Direction::East => 'E',
            Direction::South => 'S',
        }
    }

    fn arrow(self) -> char {
        match self {
            Direction::North => '^',
            Direction::West => '<',
            Direction::East => '>',
            Direction::South => 'v',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Direction::ALL.into_iter().find(|d| d.letter() == c.to_ascii_uppercase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Forward = 0,
    Left = 1,
    Right = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Forward, Action::Left, Action::Right];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    fn step(self, d: Direction) -> Option<Cell> {
        let (dx, dy) = d.delta();
        let x = self.x.checked_add_signed(dx)?;
        let y = self.y.checked_add_signed(dy)?;
        (x < WIDTH && y < HEIGHT).then_some(Cell { x, y })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridState {
    pub cell: Cell,
    pub dir: Direction,
}

impl GridState {
    pub fn index(self) -> usize {
        (self.cell.y * WIDTH + self.cell.x) * 4 + self.dir as usize
    }

    /// Inverse of [`GridState::index`]; `None` for the two absorbing states.
    pub fn from_index(index: usize) -> Option<Self> {
        if index >= N_GRID_STATES {
            return None;
        }
        let cell_idx = index / 4;
        Some(Self { cell: Cell::new(cell_idx % WIDTH, cell_idx / WIDTH), dir: Direction::ALL[index % 4] })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    pub walls: BTreeSet<Cell>,
    pub lava: BTreeSet<Cell>,
    pub goal: Cell,
    pub start: GridState,
}

impl Default for GridLayout {
    /// Wall column with two lava cells at x = 2, leaving a single safe
    /// crossing in the bottom row. Start in the top-right corner facing
    /// west; the shortest safe route takes 9 actions.
    ///
    /// ```text
    /// . . ~ . S
    /// . . # . .
    /// . . # . .
    /// . . ~ . .
    /// . K . . .
    /// ```
    fn default() -> Self {
        Self {
            walls: [Cell::new(2, 1), Cell::new(2, 2)].into(),
            lava: [Cell::new(2, 0), Cell::new(2, 3)].into(),
            goal: Cell::new(1, 4),
            start: GridState { cell: Cell::new(4, 0), dir: Direction::West },
        }
    }
}

/// Outcome of one deterministic grid step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRewards {
    pub step: f64,
    pub lava: f64,
    pub goal: f64,
}

impl Default for GridRewards {
    fn default() -> Self {
        Self { step: -0.01, lava: -1.0, goal: 1.0 }
    }
}

pub const DEFAULT_HORIZON: usize = 20;

impl GridLayout {
    pub fn validate(&self) -> Result<()> {
        let in_bounds = |c: &Cell| c.x < WIDTH && c.y < HEIGHT;
        if !self.walls.iter().chain(&self.lava).all(in_bounds) || !in_bounds(&self.goal) || !in_bounds(&self.start.cell)
        {
            return Err(Error::Layout("cell outside the 5x5 grid".into()));
        }
        let s = self.start.cell;
        if self.walls.contains(&s) || self.lava.contains(&s) || self.goal == s {
            return Err(Error::Layout("start must be a floor cell".into()));
        }
        if self.walls.contains(&self.goal) {
            return Err(Error::Layout("goal is inside a wall".into()));
        }
        if self.lava.contains(&self.goal) {
            return Err(Error::Layout("goal overlaps lava".into()));
        }
        if !self.walls.is_disjoint(&self.lava) {
            return Err(Error::Layout("a cell is both wall and lava".into()));
        }
        // lava-free path over cells
        let mut seen = BTreeSet::from([s]);
        let mut queue = VecDeque::from([s]);
        while let Some(c) = queue.pop_front() {
            if c == self.goal {
                return Ok(());
            }
            for d in Direction::ALL {
                if let Some(n) = c.step(d) {
                    if !self.walls.contains(&n) && !self.lava.contains(&n) && seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
        }
        Err(Error::Layout("goal unreachable without crossing lava".into()))
    }

    /// Deterministic transition from a state index.
    pub fn step(&self, state: usize, action: Action, rewards: &GridRewards) -> Step {
        match state {
            GOAL_STATE => return Step { next: GOAL_STATE, reward: 0.0 },
            LAVA_STATE => return Step { next: LAVA_STATE, reward: rewards.step },
            _ => {}
        }
        let gs = GridState::from_index(state).expect("grid state");
        match action {
            Action::Left => Step { next: GridState { dir: gs.dir.left(), ..gs }.index(), reward: rewards.step },
            Action::Right => Step { next: GridState { dir: gs.dir.right(), ..gs }.index(), reward: rewards.step },
            Action::Forward => match gs.cell.step(gs.dir) {
                Some(c) if self.walls.contains(&c) => Step { next: state, reward: rewards.step },
                Some(c) if self.lava.contains(&c) => Step { next: LAVA_STATE, reward: rewards.lava },
                Some(c) if c == self.goal => Step { next: GOAL_STATE, reward: rewards.goal },
                Some(c) => Step { next: GridState { cell: c, ..gs }.index(), reward: rewards.step },
                None => Step { next: state, reward: rewards.step },
            },
        }
    }

    /// Shortest action sequence from the start that ends by entering
    /// `target` (a lava cell or the goal), avoiding every other hazard.
    pub fn shortest_actions_to(&self, target: Cell) -> Option<Vec<Action>> {
        let rewards = GridRewards::default();
        let start = self.start.index();
        let mut parent: HashMap<usize, (usize, Action)> = HashMap::new();
        let mut queue = VecDeque::from([start]);
        let mut visited = BTreeSet::from([start]);
        while let Some(s) = queue.pop_front() {
            for action in Action::ALL {
                let gs = GridState::from_index(s).expect("grid state");
                let enters_target = action == Action::Forward && gs.cell.step(gs.dir) == Some(target);
                if enters_target {
                    let mut actions = vec![action];
                    let mut cur = s;
                    while let Some(&(prev, a)) = parent.get(&cur) {
                        actions.push(a);
                        cur = prev;
                    }
                    actions.reverse();
                    return Some(actions);
                }
                let next = self.step(s, action, &rewards).next;
                if next < N_GRID_STATES && visited.insert(next) {
                    parent.insert(next, (s, action));
                    queue.push_back(next);
                }
            }
        }
        None
    }

    /// Lava cell with the smallest `y` (then smallest `x`).
    pub fn topmost_lava(&self) -> Option<Cell> {
        self.lava.iter().min_by_key(|c| (c.y, c.x)).copied()
    }

    /// Parses the text grid format: five rows over `. # ~ K S`, then `dir=<N|W|E|S>`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut walls = BTreeSet::new();
        let mut lava = BTreeSet::new();
        let mut goal = None;
        let mut start = None;
        let mut dir = None;
        let mut row = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') && line.len() > WIDTH {
                continue;
            }
            if let Some(d) = line.strip_prefix("dir=") {
                let c = d.trim().chars().next().unwrap_or('?');
                dir =
                    Some(Direction::from_letter(c).ok_or_else(|| Error::parse(i + 1, format!("bad direction {d:?}")))?);
                continue;
            }
            let cells: Vec<char> = line.chars().filter(|c| !c.is_whitespace()).collect();
            if cells.len() != WIDTH || row >= HEIGHT {
                return Err(Error::parse(i + 1, format!("expected a row of {WIDTH} cells")));
            }
            for (x, ch) in cells.into_iter().enumerate() {
                let c = Cell::new(x, row);
                match ch {
                    '.' => {}
                    '#' => {
                        walls.insert(c);
                    }
                    '~' => {
                        lava.insert(c);
                    }
                    'K' => goal = Some(c),
                    'S' => start = Some(c),
                    other => return Err(Error::parse(i + 1, format!("unknown cell {other:?}"))),
                }
            }
            row += 1;
        }
        if row != HEIGHT {
            return Err(Error::Layout(format!("expected {HEIGHT} rows, found {row}")));
        }
        let layout = GridLayout {
            walls,
            lava,
            goal: goal.ok_or_else(|| Error::Layout("no goal cell".into()))?,
            start: GridState {
                cell: start.ok_or_else(|| Error::Layout("no start cell".into()))?,
                dir: dir.ok_or_else(|| Error::Layout("missing dir= line".into()))?,
            },
        };
        layout.validate()?;
        Ok(layout)
    }

    fn cell_char(&self, c: Cell) -> char {
        if self.walls.contains(&c) {
            '#'
        } else if self.lava.contains(&c) {
            '~'
        } else if self.goal == c {
            'K'
        } else if self.start.cell == c {
            'S'
        } else {
            '.'
        }
    }
}

impl fmt::Display for GridLayout {
    /// The layout file format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in 0..HEIGHT {
            let row: String = (0..WIDTH).map(|x| self.cell_char(Cell::new(x, y))).collect();
            writeln!(f, "{row}")?;
        }
        writeln!(f, "dir={}", self.start.dir.letter())
    }
}

/// The grid task as a finite-horizon model.
#[derive(Debug, Clone)]
pub struct GridWorld {
    pub layout: GridLayout,
    pub rewards: GridRewards,
    pub mdp: FiniteMdp,
}

impl GridWorld {
    pub fn start_state(&self) -> usize {
        self.layout.start.index()
    }
}

pub fn build_gridworld(layout: &GridLayout, rewards: GridRewards, horizon: usize) -> Result<GridWorld> {
    layout.validate()?;
    let mut transition = vec![0.0; N_STATES * N_ACTIONS * N_STATES];
    let mut reward = SaTable::zeros(N_STATES, N_ACTIONS);
    for s in 0..N_STATES {
        for action in Action::ALL {
            let a = action as usize;
            let step = layout.step(s, action, &rewards);
            transition[(s * N_ACTIONS + a) * N_STATES + step.next] = 1.0;
            reward.set(s, a, step.reward);
        }
    }
    let mut d0 = vec![0.0; N_STATES];
    d0[layout.start.index()] = 1.0;
    let dynamics = Dynamics::new(N_STATES, N_ACTIONS, transition, d0)?;
    let mdp = FiniteMdp::new(dynamics, reward, horizon, [GOAL_STATE, LAVA_STATE].into())?;
    Ok(GridWorld { layout: layout.clone(), rewards, mdp })
}

/// The shipped task: default layout, default rewards, `H = 20`.
pub fn default_gridworld() -> GridWorld {
    build_gridworld(&GridLayout::default(), GridRewards::default(), DEFAULT_HORIZON).expect("default layout is valid")
}

/// Text rendering with a border. With a policy, the path obtained by
/// following the policy's most likely action from the start is overlaid:
/// every cell the agent leaves by moving forward shows an arrow.
pub fn render_ascii(layout: &GridLayout, policy: Option<&Policy>) -> String {
    let mut grid: Vec<Vec<char>> =
        (0..HEIGHT).map(|y| (0..WIDTH).map(|x| layout.cell_char(Cell::new(x, y))).collect()).collect();
    if let Some(pi) = policy {
        let steps = pi.horizon().unwrap_or(DEFAULT_HORIZON);
        let rewards = GridRewards::default();
        let mut s = layout.start.index();
        for h in 0..steps {
            let Some(gs) = GridState::from_index(s) else { break };
            let a = Action::ALL[pi.mode(h, s)];
            if a == Action::Forward && gs.cell.step(gs.dir).is_some_and(|c| !layout.walls.contains(&c)) {
                grid[gs.cell.y][gs.cell.x] = gs.dir.arrow();
            }
            s = layout.step(s, a, &rewards).next;
        }
    }
    let mut out = String::new();
    let border = format!("+{}+", "-".repeat(WIDTH));
    writeln!(out, "{border}").unwrap();
    for row in grid {
        writeln!(out, "|{}|", row.into_iter().collect::<String>()).unwrap();
    }
    writeln!(out, "{border}").unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{policy_evaluation, value_iteration};

    #[test]
    fn state_encoding_is_bijective() {
        for i in 0..N_GRID_STATES {
            assert_eq!(GridState::from_index(i).unwrap().index(), i);
        }
        assert!(GridState::from_index(GOAL_STATE).is_none());
        assert!(GridState::from_index(LAVA_STATE).is_none());
    }

    #[test]
    fn four_left_turns_are_identity() {
        let layout = GridLayout::default();
        let r = GridRewards::default();
        let s0 = GridState { cell: Cell::new(3, 3), dir: Direction::East }.index();
        let mut s = s0;
        for _ in 0..4 {
            s = layout.step(s, Action::Left, &r).next;
        }
        assert_eq!(s, s0);
    }

    #[test]
    fn lava_is_terminal_and_keeps_charging_step_cost() {
        let layout = GridLayout::default();
        let r = GridRewards::default();
        let enter = layout.step(layout.start.index(), Action::Forward, &r);
        let touch = layout.step(enter.next, Action::Forward, &r);
        assert_eq!(touch, Step { next: LAVA_STATE, reward: -1.0 });
        for a in Action::ALL {
            assert_eq!(layout.step(LAVA_STATE, a, &r), Step { next: LAVA_STATE, reward: -0.01 });
        }
    }

    #[test]
    fn walls_block_forward() {
        let layout = GridLayout::default();
        let s = GridState { cell: Cell::new(3, 1), dir: Direction::West }.index();
        assert_eq!(layout.step(s, Action::Forward, &GridRewards::default()).next, s);
        let corner = GridState { cell: Cell::new(4, 0), dir: Direction::North }.index();
        assert_eq!(layout.step(corner, Action::Forward, &GridRewards::default()).next, corner);
    }

    #[test]
    fn transitions_are_one_hot() {
        let g = default_gridworld();
        assert!(g.mdp.dynamics().is_deterministic());
    }

    #[test]
    fn optimal_return_is_092() {
        let g = default_gridworld();
        let (v, pi) = value_iteration(&g.mdp, g.mdp.reward(), 1e-12).unwrap();
        let v0 = v.at_distribution(g.mdp.dynamics().d0());
        assert!((v0 - 0.92).abs() < 1e-12, "{v0}");
        for h in 0..=DEFAULT_HORIZON {
            assert_eq!(v.at(h, GOAL_STATE), 0.0);
        }
        let ev = policy_evaluation(&g.mdp, &pi, g.mdp.reward()).unwrap();
        assert!((ev.at_distribution(g.mdp.dynamics().d0()) - 0.92).abs() < 1e-12);
        // 1 - 0.01 k with k = 8 pre-goal actions
        let path = g.layout.shortest_actions_to(g.layout.goal).unwrap();
        assert_eq!(path.len(), 9);
    }

    #[test]
    fn unreachable_goal_is_rejected() {
        let mut layout = GridLayout::default();
        layout.walls.insert(Cell::new(2, 4));
        assert!(matches!(build_gridworld(&layout, GridRewards::default(), 20), Err(Error::Layout(_))));
    }

    #[test]
    fn layout_text_round_trip() {
        let layout = GridLayout::default();
        let text = layout.to_string();
        assert_eq!(text, "..~.S\n..#..\n..#..\n..~..\n.K...\ndir=W\n");
        assert_eq!(GridLayout::parse(&text).unwrap(), layout);
    }

    #[test]
    fn render_empty_and_goal() {
        let layout = GridLayout {
            walls: BTreeSet::new(),
            lava: BTreeSet::new(),
            goal: Cell::new(0, 0),
            start: GridState { cell: Cell::new(4, 4), dir: Direction::North },
        };
        let text = render_ascii(&layout, None);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), HEIGHT + 2);
        assert_eq!(lines[0], "+-----+");
        assert_eq!(lines[1], "|K....|");
        assert_eq!(lines[3], "|.....|");
        assert_eq!(lines[5], "|....S|");
    }

    #[test]
    fn rendered_optimal_path_reaches_goal() {
        let g = default_gridworld();
        let (_, pi) = value_iteration(&g.mdp, g.mdp.reward(), 1e-12).unwrap();
        let text = render_ascii(&g.layout, Some(&pi));
        let grid: Vec<Vec<char>> =
            text.lines().skip(1).take(HEIGHT).map(|l| l.chars().skip(1).take(WIDTH).collect()).collect();
        // follow the arrows from the start cell
        let (mut x, mut y) = (g.layout.start.cell.x as isize, g.layout.start.cell.y as isize);
        for _ in 0..25 {
            let (dx, dy) = match grid[y as usize][x as usize] {
                '<' => (-1, 0),
                '>' => (1, 0),
                '^' => (0, -1),
                'v' => (0, 1),
                'K' => return,
                other => panic!("path broken at ({x},{y}) on {other:?}\n{text}"),
            };
            x += dx;
            y += dy;
        }
        panic!("no goal reached\n{text}");
    }
}
