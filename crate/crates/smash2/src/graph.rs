//! Strongly connected components for small transition graphs (iterative Tarjan).

/// Computes the strongly connected components of a directed graph given as an
/// adjacency list. Components are returned in reverse topological order of the
/// condensation: a component is emitted before every component that can reach it.
pub(crate) fn sccs(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;

    // Explicit DFS frames: (node, next-edge position).
    let mut frames: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        frames.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut edge)) = frames.last_mut() {
            if *edge < adj[v].len() {
                let w = adj[v][*edge];
                *edge += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&(parent, _)) = frames.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    components.push(comp);
                }
            }
        }
    }
    components
}

pub(crate) fn is_strongly_connected(adj: &[Vec<usize>]) -> bool {
    !adj.is_empty() && sccs(adj).len() == 1
}

/// Indices (into the `sccs` output) of components with no edge leaving them.
pub(crate) fn closed_components(adj: &[Vec<usize>], comps: &[Vec<usize>]) -> Vec<usize> {
    let mut member = vec![usize::MAX; adj.len()];
    for (ci, comp) in comps.iter().enumerate() {
        for &v in comp {
            member[v] = ci;
        }
    }
    let mut closed = Vec::new();
    for (ci, comp) in comps.iter().enumerate() {
        let escapes = comp
            .iter()
            .any(|&v| adj[v].iter().any(|&w| member[w] != ci));
        if !escapes {
            closed.push(ci);
        }
    }
    closed
}
