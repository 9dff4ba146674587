//! Linear-time tidy tree positioning (Walker's algorithm with Buchheim's
//! corrections), computing the breadth coordinate of every node.
//!
//! Adjacent nodes on the same level end up at least `sep` apart, a parent
//! sits at the midpoint of its first and last child, and child order is
//! preserved.

/// A rooted tree given as child lists; node 0 is the root.
pub struct Shape<'a> {
    pub children: &'a [Vec<usize>],
}

struct Work {
    parent: usize,
    index: usize,
    prelim: f64,
    modifier: f64,
    change: f64,
    shift: f64,
    thread: Option<usize>,
    ancestor: usize,
    default_ancestor: Option<usize>,
}

struct Walker<'a> {
    children: Vec<&'a [usize]>,
    w: Vec<Work>,
    sep: f64,
}

impl<'a> Walker<'a> {
    fn next_left(&self, v: usize) -> Option<usize> {
        self.children[v].first().copied().or(self.w[v].thread)
    }

    fn next_right(&self, v: usize) -> Option<usize> {
        self.children[v].last().copied().or(self.w[v].thread)
    }

    fn move_subtree(&mut self, wm: usize, wp: usize, shift: f64) {
        let change = shift / (self.w[wp].index - self.w[wm].index) as f64;
        self.w[wp].change -= change;
        self.w[wp].shift += shift;
        self.w[wm].change += change;
        self.w[wp].prelim += shift;
        self.w[wp].modifier += shift;
    }

    fn execute_shifts(&mut self, v: usize) {
        let (mut shift, mut change) = (0.0, 0.0);
        for &c in self.children[v].iter().rev() {
            self.w[c].prelim += shift;
            self.w[c].modifier += shift;
            change += self.w[c].change;
            shift += self.w[c].shift + change;
        }
    }

    fn next_ancestor(&self, vim: usize, v: usize, ancestor: usize) -> usize {
        let a = self.w[vim].ancestor;
        if self.w[a].parent == self.w[v].parent {
            a
        } else {
            ancestor
        }
    }

    fn apportion(&mut self, v: usize, left: Option<usize>, mut ancestor: usize) -> usize {
        let Some(w) = left else { return ancestor };
        let parent = self.w[v].parent;
        let (mut vip, mut vop, mut vim) = (v, v, w);
        let mut vom = self.children[parent][0];
        let mut sip = self.w[vip].modifier;
        let mut sop = self.w[vop].modifier;
        let mut sim = self.w[vim].modifier;
        let mut som = self.w[vom].modifier;
        let (mut nim, mut nip) = (self.next_right(vim), self.next_left(vip));
        while let (Some(im), Some(ip)) = (nim, nip) {
            vim = im;
            vip = ip;
            vom = self.next_left(vom).expect("left contour");
            vop = self.next_right(vop).expect("right contour");
            self.w[vop].ancestor = v;
            let shift = self.w[vim].prelim + sim - self.w[vip].prelim - sip + self.sep;
            if shift > 0.0 {
                let a = self.next_ancestor(vim, v, ancestor);
                self.move_subtree(a, v, shift);
                sip += shift;
                sop += shift;
            }
            sim += self.w[vim].modifier;
            sip += self.w[vip].modifier;
            som += self.w[vom].modifier;
            sop += self.w[vop].modifier;
            nim = self.next_right(vim);
            nip = self.next_left(vip);
        }
        if nim.is_some() && self.next_right(vop).is_none() {
            self.w[vop].thread = nim;
            self.w[vop].modifier += sim - sop;
        }
        if nip.is_some() && self.next_left(vom).is_none() {
            self.w[vom].thread = nip;
            self.w[vom].modifier += sip - som;
            ancestor = v;
        }
        ancestor
    }

    fn first_walk(&mut self, v: usize) {
        let parent = self.w[v].parent;
        let index = self.w[v].index;
        let left = (index > 0).then(|| self.children[parent][index - 1]);
        let kids = self.children[v];
        if let (Some(&first), Some(&last)) = (kids.first(), kids.last()) {
            self.execute_shifts(v);
            let mid = (self.w[first].prelim + self.w[last].prelim) / 2.0;
            match left {
                Some(l) => {
                    self.w[v].prelim = self.w[l].prelim + self.sep;
                    self.w[v].modifier = self.w[v].prelim - mid;
                }
                None => self.w[v].prelim = mid,
            }
        } else if let Some(l) = left {
            self.w[v].prelim = self.w[l].prelim + self.sep;
        }
        let start = self.w[parent].default_ancestor.unwrap_or(self.children[parent][0]);
        let a = self.apportion(v, left, start);
        self.w[parent].default_ancestor = Some(a);
    }
}

/// Breadth positions for every node of `shape`; the root is placed at 0.
pub fn tidy_positions(shape: &Shape<'_>, sep: f64) -> Vec<f64> {
    let n = shape.children.len();
    if n == 0 {
        return Vec::new();
    }
    // Slot `n` is a virtual parent of the root.
    let virtual_root = [0usize];
    let mut children: Vec<&[usize]> = shape.children.iter().map(Vec::as_slice).collect();
    children.push(&virtual_root);
    let mut w: Vec<Work> = (0..=n)
        .map(|i| Work {
            parent: n,
            index: 0,
            prelim: 0.0,
            modifier: 0.0,
            change: 0.0,
            shift: 0.0,
            thread: None,
            ancestor: i,
            default_ancestor: None,
        })
        .collect();
    for (p, kids) in shape.children.iter().enumerate() {
        for (i, &c) in kids.iter().enumerate() {
            w[c].parent = p;
            w[c].index = i;
        }
    }
    let mut walker = Walker { children, w, sep };

    // Preorder with children visited right to left; reversed, it is a
    // left-to-right postorder.
    let mut pre = Vec::with_capacity(n);
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        pre.push(v);
        stack.extend(walker.children[v].iter());
    }
    for &v in pre.iter().rev() {
        walker.first_walk(v);
    }
    walker.w[n].modifier = -walker.w[0].prelim;
    let mut pos = vec![0.0; n];
    for &v in &pre {
        let parent = walker.w[v].parent;
        let pm = walker.w[parent].modifier;
        pos[v] = walker.w[v].prelim + pm;
        walker.w[v].modifier += pm;
    }
    pos
}
