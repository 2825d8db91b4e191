// SPDX-License-Identifier: Apache-2.0

//! Scripted annotator standing in for a human at the lasso. It groups the
//! active view into density-linked components and drives a `Session`
//! through commits, reprojections and backtracking.

use serde::{Deserialize, Serialize};

use pvil_core::distance::UnionFind;
use pvil_core::embed::Embedding;

use crate::error::Result;
use crate::eventlog::Event;
use crate::geometry::{dilated_hull, shrink_toward_centroid, Point, SelectionRegion};
use crate::session::{Outcome, Session};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    /// Submits full hulls.
    Aggressive,
    /// Shrinks hulls 10% toward their centroid before submitting.
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotatorPolicy {
    /// Link radius as a multiple of the median nearest-neighbor distance.
    pub link_radius_factor: f64,
    pub min_group: usize,
    pub max_rounds: usize,
    pub stance: Stance,
    /// Deepest child view the annotator will open.
    pub max_depth: usize,
    /// Components below this fraction of the view are folded in like
    /// components below `min_group`.
    pub relative_min_group: f64,
    /// Joins groups without any labeled member to their nearest group
    /// before submitting.
    pub attach_unlabeled_groups: bool,
    /// Joins groups whose evidence agrees on one class when they lie within
    /// this multiple of the link radius of each other; zero disables it.
    pub agreeing_gap_factor: f64,
}

impl Default for AnnotatorPolicy {
    fn default() -> Self {
        Self {
            link_radius_factor: 3.0,
            min_group: 5,
            max_rounds: 50,
            stance: Stance::Aggressive,
            max_depth: 8,
            relative_min_group: 0.01,
            attach_unlabeled_groups: true,
            agreeing_gap_factor: 2.0,
        }
    }
}

impl AnnotatorPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.link_radius_factor > 0.0)
            || self.min_group < 2
            || !(0.0..1.0).contains(&self.relative_min_group)
            || !(self.agreeing_gap_factor >= 0.0 && self.agreeing_gap_factor.is_finite())
        {
            return Err(crate::error::SessionError::InvalidParameter(
                "link_radius_factor must be positive, min_group at least 2, relative_min_group in [0, 1) \
                 and agreeing_gap_factor finite and non-negative"
                    .into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptualGroup {
    /// Rows of the view.
    pub rows: Vec<usize>,
    /// Dataset indices of those rows.
    pub member_indices: Vec<usize>,
    /// Convex hull of the members dilated by the link radius.
    pub hull_polygon: Vec<Point>,
}

/// Uniform bucket grid over 2-D points.
struct Grid {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl Grid {
    fn new(pts: &[Point], rows: impl Iterator<Item = usize>, cell: f64) -> Self {
        let (lo, hi) = crate::geometry::bounding_box(pts);
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        // Keep the bucket array near the point count.
        let cell = cell.max(span / (2.0 * (pts.len() as f64).sqrt()).max(1.0)).max(span * 1e-9);
        let nx = ((hi[0] - lo[0]) / cell).floor() as usize + 1;
        let ny = ((hi[1] - lo[1]) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        let mut g = Grid {
            origin: lo,
            cell,
            nx,
            ny,
            buckets: Vec::new(),
        };
        for r in rows {
            let (cx, cy) = g.cell_of(pts[r]);
            buckets[cy * nx + cx].push(r);
        }
        g.buckets = buckets;
        g
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let cx = (((p[0] - self.origin[0]) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let cy = (((p[1] - self.origin[1]) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        (cx, cy)
    }

    /// Rows in the square ring of cells at Chebyshev distance `ring` from `c`.
    fn ring(&self, c: (usize, usize), ring: usize, mut f: impl FnMut(usize)) {
        let (cx, cy) = (c.0 as i64, c.1 as i64);
        let r = ring as i64;
        for y in (cy - r)..=(cy + r) {
            if y < 0 || y >= self.ny as i64 {
                continue;
            }
            for x in (cx - r)..=(cx + r) {
                if x < 0 || x >= self.nx as i64 {
                    continue;
                }
                if (x - cx).abs() != r && (y - cy).abs() != r {
                    continue;
                }
                for &row in &self.buckets[y as usize * self.nx + x as usize] {
                    f(row);
                }
            }
        }
    }

    /// Nearest row to `p` accepted by `keep`, with its distance.
    fn nearest(&self, pts: &[Point], p: Point, keep: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
        let c = self.cell_of(p);
        let max_ring = self.nx.max(self.ny);
        let mut best: Option<(usize, f64)> = None;
        for ring in 0..=max_ring {
            if let Some((_, d)) = best {
                // Everything in this ring is at least (ring - 1) cells away.
                if d <= (ring as f64 - 1.0) * self.cell {
                    break;
                }
            }
            self.ring(c, ring, |row| {
                if !keep(row) {
                    return;
                }
                let d = dist(pts[row], p);
                if best.map_or(true, |(br, bd)| d < bd || (d == bd && row < br)) {
                    best = Some((row, d));
                }
            });
        }
        best
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn view_points(view: &Embedding) -> Vec<Point> {
    (0..view.len()).map(|r| view.point(r)).collect()
}

/// Median over points of the distance to their nearest other point.
pub fn median_nn_distance(pts: &[Point]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let (lo, hi) = crate::geometry::bounding_box(pts);
    let area = ((hi[0] - lo[0]) * (hi[1] - lo[1])).max(f64::MIN_POSITIVE);
    let grid = Grid::new(pts, 0..pts.len(), (area / pts.len() as f64).sqrt());
    let mut d: Vec<f64> = (0..pts.len())
        .map(|r| grid.nearest(pts, pts[r], |o| o != r).map_or(0.0, |x| x.1))
        .collect();
    d.sort_by(f64::total_cmp);
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    }
}

/// Groups `rows` of `pts` into components of the radius-`r` graph, folding
/// components smaller than `min_group` into their nearest neighbors.
fn radius_components(pts: &[Point], rows: &[usize], r: f64, min_group: usize) -> Vec<Vec<usize>> {
    let local: Vec<Point> = rows.iter().map(|&i| pts[i]).collect();
    let m = local.len();
    if m == 0 {
        return Vec::new();
    }
    let grid = Grid::new(&local, 0..m, r);
    let reach = (r / grid.cell).ceil() as usize;
    let mut uf = UnionFind::new(m);
    for a in 0..m {
        let c = grid.cell_of(local[a]);
        for ring in 0..=reach {
            grid.ring(c, ring, |b| {
                if b > a && dist(local[a], local[b]) <= r {
                    uf.union(a, b);
                }
            });
        }
    }
    let mut size = vec![1usize; m];
    for a in 0..m {
        let root = uf.find(a);
        if root != a {
            size[root] += 1;
            size[a] = 0;
        }
    }
    let total = m;
    // Small components join the component nearest to them, shortest gap
    // first, so fragments coalesce with their neighbors before a long gap
    // is crossed.
    loop {
        let mut members: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for a in 0..m {
            let root = uf.find(a);
            if size[root] < min_group && size[root] < total {
                members.entry(root).or_default().push(a);
            }
        }
        if members.is_empty() {
            break;
        }
        let roots: Vec<usize> = (0..m).map(|a| uf.find(a)).collect();
        let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(members.len());
        for (&root, rows) in &members {
            let mut best: Option<(usize, f64)> = None;
            for &a in rows {
                if let Some((b, d)) = grid.nearest(&local, local[a], |b| roots[b] != root) {
                    if best.map_or(true, |(_, bd)| d < bd) {
                        best = Some((b, d));
                    }
                }
            }
            if let Some((b, d)) = best {
                edges.push((d, root, b));
            }
        }
        edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for (_, a, b) in edges {
            let (ra, rb) = (uf.find(a), uf.find(b));
            if ra == rb || (size[ra] >= min_group && size[rb] >= min_group) {
                continue;
            }
            let joined = size[ra] + size[rb];
            uf.union(ra, rb);
            let root = uf.find(ra);
            size[ra] = 0;
            size[rb] = 0;
            size[root] = joined;
        }
    }
    let (count, labels) = uf.labels();
    let mut merged: Vec<Vec<usize>> = vec![Vec::new(); count];
    for a in 0..m {
        merged[labels[a]].push(rows[a]);
    }
    let mut groups: Vec<Vec<usize>> = merged.into_iter().filter(|g| !g.is_empty()).collect();
    groups.sort_by_key(|g| g[0]);
    groups
}

/// Density-linked groups of a view and the link radius used.
pub fn segment_view_with_radius(view: &Embedding, policy: &AnnotatorPolicy) -> Result<(Vec<PerceptualGroup>, f64)> {
    policy.validate()?;
    let pts = view_points(view);
    let nn = median_nn_distance(&pts);
    let r = if nn > 0.0 {
        policy.link_radius_factor * nn
    } else {
        let (lo, hi) = crate::geometry::bounding_box(&pts);
        1e-9 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0)
    };
    let rows: Vec<usize> = (0..pts.len()).collect();
    let min_group = policy
        .min_group
        .max((policy.relative_min_group * pts.len() as f64).ceil() as usize);
    let groups = radius_components(&pts, &rows, r, min_group)
        .into_iter()
        .map(|rows| {
            let member_pts: Vec<Point> = rows.iter().map(|&i| pts[i]).collect();
            PerceptualGroup {
                member_indices: rows.iter().map(|&i| view.scope()[i]).collect(),
                hull_polygon: dilated_hull(&member_pts, r),
                rows,
            }
        })
        .collect();
    Ok((groups, r))
}

pub fn segment_view(view: &Embedding, policy: &AnnotatorPolicy) -> Result<Vec<PerceptualGroup>> {
    segment_view_with_radius(view, policy).map(|g| g.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub commits: usize,
    /// Groups the annotator acted on, counting each lasso target once
    /// however many pieces it was submitted in.
    pub group_steps: usize,
    pub rounds: usize,
    pub truncated: bool,
    pub transcript: Vec<Event>,
}

/// Snapshot of one view while the annotator works on it.
struct ViewCtx {
    pts: Vec<Point>,
    scope: Vec<usize>,
    r: f64,
    depth: usize,
}

struct Annotator<'a> {
    s: &'a mut Session,
    policy: AnnotatorPolicy,
    group_steps: usize,
}

impl Annotator<'_> {
    fn process_view(&mut self, depth: usize) -> Result<()> {
        let view = &self.s.active_view().embedding;
        let (groups, r) = segment_view_with_radius(view, &self.policy)?;
        let ctx = ViewCtx {
            pts: view_points(view),
            scope: view.scope().to_vec(),
            r,
            depth,
        };
        let mut rows: Vec<Vec<usize>> = groups.into_iter().map(|g| g.rows).collect();
        if self.policy.attach_unlabeled_groups {
            rows = self.attach_unlabeled(&ctx, rows);
        }
        if self.policy.agreeing_gap_factor > 0.0 {
            rows = self.merge_agreeing(&ctx, rows);
        }
        for g in rows {
            self.process_group(&ctx, &g, depth)?;
        }
        Ok(())
    }

    /// Merges groups with no labeled member into the group owning the
    /// nearest point outside them, shortest gap first.
    fn attach_unlabeled(&self, ctx: &ViewCtx, groups: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
        let m = ctx.pts.len();
        let k = groups.len();
        let bare: Vec<bool> = groups.iter().map(|g| self.histogram(ctx, g).1 == 0).collect();
        if k < 2 || bare.iter().all(|&b| b) || !bare.iter().any(|&b| b) {
            return groups;
        }
        let mut uf = UnionFind::new(k);
        let mut owner = vec![0usize; m];
        for (g, rows) in groups.iter().enumerate() {
            rows.iter().for_each(|&r| owner[r] = g);
        }
        let grid = Grid::new(&ctx.pts, 0..m, ctx.r);
        let mut members: Vec<Vec<usize>> = groups;
        let mut is_bare = bare;
        // Nearest (distance, row) outside each bare group.
        let mut nearest: Vec<Option<(f64, usize)>> = vec![None; k];
        let find_nearest = |uf: &mut UnionFind, rows: &[usize], g: usize| -> Option<(f64, usize)> {
            let roots: Vec<usize> = (0..k).map(|x| uf.find(x)).collect();
            let mut best: Option<(f64, usize)> = None;
            for &r in rows {
                if let Some((o, d)) = grid.nearest(&ctx.pts, ctx.pts[r], |o| roots[owner[o]] != g) {
                    if best.map_or(true, |(bd, bo)| d < bd || (d == bd && o < bo)) {
                        best = Some((d, o));
                    }
                }
            }
            best
        };
        for g in 0..k {
            if is_bare[g] {
                nearest[g] = find_nearest(&mut uf, &members[g], g);
            }
        }
        loop {
            let pick = (0..k)
                .filter(|&g| is_bare[g] && uf.find(g) == g)
                .filter_map(|g| nearest[g].map(|(d, o)| (d, g, o)))
                .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            let Some((_, g, o)) = pick else {
                break;
            };
            let target = uf.find(owner[o]);
            let moved = std::mem::take(&mut members[g]);
            members[target].extend(moved);
            uf.union(g, target);
            let root = uf.find(target);
            if root != target {
                let rows = std::mem::take(&mut members[target]);
                members[root] = rows;
            }
            let still_bare = is_bare[target];
            is_bare[g] = false;
            is_bare[target] = false;
            is_bare[root] = still_bare;
            if still_bare {
                nearest[root] = find_nearest(&mut uf, &members[root], root);
            }
            if (0..k).filter(|&x| uf.find(x) == x).count() < 2 {
                break;
            }
        }
        let mut out: Vec<Vec<usize>> = members
            .into_iter()
            .filter(|g| !g.is_empty())
            .map(|mut g| {
                g.sort_unstable();
                g
            })
            .collect();
        out.sort_by_key(|g| g[0]);
        out
    }

    /// Merges neighboring groups that are pure for the same class.
    fn merge_agreeing(&self, ctx: &ViewCtx, groups: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
        if groups.len() < 2 {
            return groups;
        }
        let class: Vec<Option<usize>> = groups.iter().map(|g| self.pure_class(ctx, g)).collect();
        let gap = self.policy.agreeing_gap_factor * ctx.r;
        let pairs = neighbor_pairs(ctx, &groups, gap, |a, b| class[a].is_some() && class[a] == class[b]);
        let mut uf = UnionFind::new(groups.len());
        for (a, b) in pairs {
            uf.union(a, b);
        }
        let mut merged: Vec<Vec<usize>> = vec![Vec::new(); groups.len()];
        for (k, g) in groups.into_iter().enumerate() {
            merged[uf.find(k)].extend(g);
        }
        let mut out: Vec<Vec<usize>> = merged
            .into_iter()
            .filter(|g| !g.is_empty())
            .map(|mut g| {
                g.sort_unstable();
                g
            })
            .collect();
        out.sort_by_key(|g| g[0]);
        out
    }

    /// Majority class of a group's labeled members when it passes the purity
    /// rule.
    fn pure_class(&self, ctx: &ViewCtx, rows: &[usize]) -> Option<usize> {
        let (hist, labeled, _) = self.histogram(ctx, rows);
        if labeled == 0 {
            return None;
        }
        let majority = majority_class(&hist);
        (hist[majority] as f64 >= self.s.config().eta * labeled as f64).then_some(majority)
    }

    fn histogram(&self, ctx: &ViewCtx, rows: &[usize]) -> (Vec<usize>, usize, usize) {
        let mut hist = vec![0; self.s.num_classes()];
        let mut unlabeled = 0;
        for &r in rows {
            match self.s.ledger().class_of(ctx.scope[r]) {
                Some(c) => hist[c] += 1,
                None => unlabeled += 1,
            }
        }
        let labeled = hist.iter().sum();
        (hist, labeled, unlabeled)
    }

    fn process_group(&mut self, ctx: &ViewCtx, rows: &[usize], depth: usize) -> Result<()> {
        let (hist, labeled, unlabeled) = self.histogram(ctx, rows);
        if unlabeled == 0 || labeled == 0 {
            return Ok(());
        }
        self.group_steps += 1;
        let majority = majority_class(&hist);
        if hist[majority] as f64 >= self.s.config().eta * labeled as f64 {
            self.label_pure(ctx, rows, majority)
        } else {
            self.handle_impure(ctx, rows, depth)
        }
    }

    fn submit(&mut self, poly: Vec<Point>, proposed: Option<usize>) -> Result<Option<Outcome>> {
        let poly = match self.policy.stance {
            Stance::Aggressive => poly,
            Stance::Conservative => shrink_toward_centroid(&poly, 0.1),
        };
        let region = match SelectionRegion::new(poly) {
            Ok(r) => r,
            Err(_) => return Ok(None),
        };
        match self.s.commit_selection(region, proposed) {
            Ok(rec) => Ok(Some(rec.outcome)),
            Err(crate::error::SessionError::EmptySelection(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Labels a group whose evidence passes the purity rule, splitting it
    /// into pieces whose outlines do not reach into other groups.
    fn label_pure(&mut self, ctx: &ViewCtx, rows: &[usize], majority: usize) -> Result<()> {
        let mut in_group = vec![false; ctx.pts.len()];
        rows.iter().for_each(|&r| in_group[r] = true);
        let mut pieces = Vec::new();
        self.clean_pieces(ctx, rows.to_vec(), &in_group, 0, &mut pieces);
        for (poly, piece) in pieces {
            let (_, labeled, unlabeled) = self.histogram(ctx, &piece);
            if unlabeled == 0 {
                continue;
            }
            let proposed = if labeled == 0 { Some(majority) } else { None };
            if let Some(Outcome::Reprojected { .. }) = self.submit(poly, proposed)? {
                self.follow_child(ctx)?;
            }
        }
        Ok(())
    }

    fn captures_foreign(&self, ctx: &ViewCtx, poly: &[Point], in_group: &[bool]) -> bool {
        let Ok(region) = SelectionRegion::new(poly.to_vec()) else {
            return true;
        };
        ctx.pts
            .iter()
            .enumerate()
            .any(|(r, &p)| !in_group[r] && region.contains(p))
    }

    fn clean_pieces(
        &self,
        ctx: &ViewCtx,
        rows: Vec<usize>,
        in_group: &[bool],
        level: usize,
        out: &mut Vec<(Vec<Point>, Vec<usize>)>,
    ) {
        let pts: Vec<Point> = rows.iter().map(|&r| ctx.pts[r]).collect();
        let mut dilation = 0.5 * ctx.r;
        for _ in 0..3 {
            let poly = dilated_hull(&pts, dilation);
            if !self.captures_foreign(ctx, &poly, in_group) {
                out.push((poly, rows));
                return;
            }
            dilation *= 0.5;
        }
        if rows.len() < 4 || level >= 12 {
            out.push((dilated_hull(&pts, dilation), rows));
            return;
        }
        let (a, b) = bisect(&ctx.pts, &rows);
        self.clean_pieces(ctx, a, in_group, level + 1, out);
        self.clean_pieces(ctx, b, in_group, level + 1, out);
    }

    fn handle_impure(&mut self, ctx: &ViewCtx, rows: &[usize], depth: usize) -> Result<()> {
        if depth >= self.policy.max_depth || !self.s.config().reprojection {
            if !self.s.config().reprojection {
                let pts: Vec<Point> = rows.iter().map(|&r| ctx.pts[r]).collect();
                self.submit(dilated_hull(&pts, ctx.r), None)?;
                return Ok(());
            }
            return self.bisect_and_process(ctx, rows, depth);
        }
        let pts: Vec<Point> = rows.iter().map(|&r| ctx.pts[r]).collect();
        match self.submit(dilated_hull(&pts, ctx.r), None)? {
            Some(Outcome::Reprojected { .. }) => {
                if self.s.active_view().scope().len() >= ctx.scope.len() {
                    // The child repeats this view; narrow the selection instead.
                    self.s.back()?;
                    self.bisect_and_process(ctx, rows, depth)
                } else {
                    self.follow_child(ctx)
                }
            }
            Some(Outcome::Labeled { .. }) | Some(Outcome::Rejected { .. }) | None => Ok(()),
        }
    }

    fn follow_child(&mut self, ctx: &ViewCtx) -> Result<()> {
        self.process_view(ctx.depth + 1)?;
        self.s.back()?;
        Ok(())
    }

    fn bisect_and_process(&mut self, ctx: &ViewCtx, rows: &[usize], depth: usize) -> Result<()> {
        if rows.len() < 2 * self.policy.min_group {
            return Ok(());
        }
        let (a, b) = bisect(&ctx.pts, rows);
        self.process_group(ctx, &a, depth + 1)?;
        self.process_group(ctx, &b, depth + 1)
    }
}

/// Pairs of groups `(a, b)`, `a < b`, with members within `gap` of each
/// other and accepted by `accept`.
fn neighbor_pairs(
    ctx: &ViewCtx,
    groups: &[Vec<usize>],
    gap: f64,
    accept: impl Fn(usize, usize) -> bool,
) -> std::collections::BTreeSet<(usize, usize)> {
    let mut owner = vec![0usize; ctx.pts.len()];
    for (k, g) in groups.iter().enumerate() {
        g.iter().for_each(|&r| owner[r] = k);
    }
    let rows: Vec<usize> = groups.iter().flatten().copied().collect();
    let grid = Grid::new(&ctx.pts, rows.iter().copied(), gap);
    let reach = (gap / grid.cell).ceil() as usize;
    let mut pairs = std::collections::BTreeSet::new();
    for &a in &rows {
        let c = grid.cell_of(ctx.pts[a]);
        for ring in 0..=reach {
            grid.ring(c, ring, |b| {
                let (ga, gb) = (owner[a], owner[b]);
                if ga < gb && !pairs.contains(&(ga, gb)) && dist(ctx.pts[a], ctx.pts[b]) <= gap && accept(ga, gb) {
                    pairs.insert((ga, gb));
                }
            });
        }
    }
    pairs
}

/// Most frequent class, lowest id on ties.
fn majority_class(hist: &[usize]) -> usize {
    let mut majority = 0;
    for (c, &v) in hist.iter().enumerate() {
        if v > hist[majority] {
            majority = c;
        }
    }
    majority
}

/// Splits rows at the median of their projection on the principal axis.
fn bisect(pts: &[Point], rows: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let m = rows.len() as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    for &r in rows {
        mx += pts[r][0];
        my += pts[r][1];
    }
    mx /= m;
    my /= m;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &r in rows {
        let (dx, dy) = (pts[r][0] - mx, pts[r][1] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // Major axis of the 2×2 scatter matrix.
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (ux, uy) = (theta.cos(), theta.sin());
    let mut keyed: Vec<(f64, usize)> = rows.iter().map(|&r| (pts[r][0] * ux + pts[r][1] * uy, r)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let half = keyed.len() / 2;
    let a = keyed[..half].iter().map(|k| k.1).collect();
    let b = keyed[half..].iter().map(|k| k.1).collect();
    (a, b)
}

/// Drives a fresh session to completion and finishes it.
pub fn run_headless(session: &mut Session, policy: &AnnotatorPolicy) -> Result<OracleReport> {
    policy.validate()?;
    let start_commits = session.history().len();
    let mut rounds = 0;
    let mut truncated = false;
    let group_steps;
    {
        let mut annotator = Annotator {
            s: session,
            policy: *policy,
            group_steps: 0,
        };
        loop {
            if rounds == policy.max_rounds {
                truncated = true;
                break;
            }
            rounds += 1;
            let before = annotator.s.ledger().labeled_count();
            annotator.process_view(0)?;
            if annotator.s.ledger().labeled_count() == before {
                break;
            }
        }
        group_steps = annotator.group_steps;
    }
    session.finish();
    Ok(OracleReport {
        commits: session.history().len() - start_commits,
        group_steps,
        rounds,
        truncated,
        transcript: session.events().to_vec(),
    })
}
