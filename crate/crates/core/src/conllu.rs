//! Dependency-parsed documents in CoNLL-U.
//!
//! Documents are delimited by `# newdoc id = <article_id>` comments and every
//! sentence carries a `# sent_id = ...` comment. An externally resolved
//! coreference mention may be supplied in the MISC column as `Coref=<string>`.
//! Multiword-token and empty-node lines are carried through untouched but do
//! not take part in the tree.

use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConlluError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected 10 tab-separated columns, found {found}")]
    Columns { line: usize, found: usize },
    #[error("line {line}: invalid {column} value {value:?}")]
    Field {
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error("line {line}: sentence before any `# newdoc id =` comment")]
    MissingDocument { line: usize },
    #[error("line {line}: sentence without `# sent_id =` comment")]
    MissingSentId { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    /// 0 marks the root.
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
    pub coref_canonical: Option<String>,
}

impl Token {
    fn misc_value(&self, key: &str) -> Option<&str> {
        self.misc
            .split('|')
            .find_map(|kv| kv.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
    }

    pub fn space_after(&self) -> bool {
        self.misc_value("SpaceAfter") != Some("No")
    }

    pub fn lower_form(&self) -> String {
        self.form.to_lowercase()
    }

    pub fn lower_lemma(&self) -> String {
        if self.lemma.is_empty() || self.lemma == "_" {
            self.form.to_lowercase()
        } else {
            self.lemma.to_lowercase()
        }
    }

    pub fn has_feature(&self, key: &str, value: &str) -> bool {
        self.feats
            .split('|')
            .any(|kv| kv.split_once('=') == Some((key, value)))
    }
}

/// A sentence whose head links form a single-rooted tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSentence {
    pub article_id: String,
    pub sentence_index: usize,
    pub sent_id: String,
    /// Raw comment lines, including `# newdoc` / `# sent_id`.
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
    /// Multiword-token / empty-node lines, keyed by the number of regular
    /// tokens that precede them.
    extra_lines: Vec<(usize, String)>,
    children: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeError(pub String);

impl fmt::Display for TreeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl ParsedSentence {
    /// Builds a sentence, checking contiguous indices, head range, a single
    /// root and acyclicity.
    pub fn new(
        article_id: impl Into<String>,
        sentence_index: usize,
        sent_id: impl Into<String>,
        tokens: Vec<Token>,
    ) -> Result<Self, TreeError> {
        Self::with_lines(article_id.into(), sentence_index, sent_id.into(), Vec::new(), tokens, Vec::new())
    }

    fn with_lines(
        article_id: String,
        sentence_index: usize,
        sent_id: String,
        comments: Vec<String>,
        tokens: Vec<Token>,
        extra_lines: Vec<(usize, String)>,
    ) -> Result<Self, TreeError> {
        let n = tokens.len();
        if n == 0 {
            return Err(TreeError("sentence has no tokens".into()));
        }
        let mut children = vec![Vec::new(); n + 1];
        let mut roots = 0;
        for (i, t) in tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(TreeError(format!("token index {} out of sequence (expected {})", t.index, i + 1)));
            }
            if t.head > n {
                return Err(TreeError(format!("token {} has head {} beyond sentence length {n}", t.index, t.head)));
            }
            if t.head == t.index {
                return Err(TreeError(format!("token {} is its own head", t.index)));
            }
            if t.head == 0 {
                roots += 1;
            }
            children[t.head].push(t.index);
        }
        if roots != 1 {
            return Err(TreeError(format!("expected exactly one root, found {roots}")));
        }
        // Every token must reach the root within n steps.
        for t in &tokens {
            let mut cur = t.index;
            let mut steps = 0;
            while cur != 0 {
                cur = tokens[cur - 1].head;
                steps += 1;
                if steps > n {
                    return Err(TreeError(format!("head links of token {} form a cycle", t.index)));
                }
            }
        }
        Ok(ParsedSentence {
            article_id,
            sentence_index,
            sent_id,
            comments,
            tokens,
            extra_lines,
            children,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token at a 1-based index.
    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index - 1]
    }

    pub fn root(&self) -> usize {
        self.children[0][0]
    }

    /// Dependents of `index` in surface order (`0` gives the root).
    pub fn children(&self, index: usize) -> &[usize] {
        &self.children[index]
    }

    pub fn head(&self, index: usize) -> usize {
        self.token(index).head
    }

    /// Heads from `index` upward, excluding `index` itself and the artificial
    /// root 0.
    pub fn ancestors(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let mut cur = self.head(index);
        std::iter::from_fn(move || {
            if cur == 0 {
                None
            } else {
                let out = cur;
                cur = self.head(cur);
                Some(out)
            }
        })
    }

    pub fn is_ancestor(&self, ancestor: usize, index: usize) -> bool {
        self.ancestors(index).any(|a| a == ancestor)
    }

    /// Surface text of the given token indices, honouring `SpaceAfter=No`.
    pub fn render(&self, indices: &[usize]) -> String {
        let mut out = String::new();
        for (k, &i) in indices.iter().enumerate() {
            let t = self.token(i);
            out.push_str(&t.form);
            let next_adjacent = indices.get(k + 1).is_some_and(|&n| n == i + 1);
            if k + 1 < indices.len() && (t.space_after() || !next_adjacent) {
                out.push(' ');
            }
        }
        out
    }

    pub fn text(&self) -> String {
        let all: Vec<usize> = (1..=self.len()).collect();
        self.render(&all)
    }
}

/// All tokens reachable from `root` through dependent links, inclusive, in
/// surface order.
pub fn subtree(sentence: &ParsedSentence, root: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(i) = stack.pop() {
        out.push(i);
        stack.extend_from_slice(sentence.children(i));
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDocument {
    pub article_id: String,
    pub sentences: Vec<ParsedSentence>,
}

/// A sentence that was read but dropped because it violates the tree
/// invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub article_id: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {} ({}): {}", self.line, self.article_id, self.message)
    }
}

#[derive(Debug, Default)]
pub struct ReadOutcome {
    pub documents: Vec<ParsedDocument>,
    pub rejected: Vec<Diagnostic>,
}

struct Pending {
    first_line: usize,
    comments: Vec<String>,
    tokens: Vec<Token>,
    extra: Vec<(usize, String)>,
    newdoc: Option<String>,
    sent_id: Option<String>,
}

impl Pending {
    fn new() -> Self {
        Pending {
            first_line: 0,
            comments: Vec::new(),
            tokens: Vec::new(),
            extra: Vec::new(),
            newdoc: None,
            sent_id: None,
        }
    }

    fn is_empty(&self) -> bool {
        self.comments.is_empty() && self.tokens.is_empty() && self.extra.is_empty()
    }
}

fn comment_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.strip_prefix('#')?.trim_start();
    let rest = rest.strip_prefix(key)?.trim_start();
    rest.strip_prefix('=').map(str::trim)
}

fn parse_token(line: &str, lineno: usize) -> Result<Result<Token, String>, ConlluError> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(ConlluError::Columns {
            line: lineno,
            found: cols.len(),
        });
    }
    if cols[0].contains('-') || cols[0].contains('.') {
        return Ok(Err(line.to_string()));
    }
    let field = |column: &'static str, value: &str| ConlluError::Field {
        line: lineno,
        column,
        value: value.to_string(),
    };
    let index: usize = cols[0].parse().map_err(|_| field("ID", cols[0]))?;
    let head: usize = cols[6].parse().map_err(|_| field("HEAD", cols[6]))?;
    let misc = cols[9].to_string();
    let coref_canonical = misc
        .split('|')
        .find_map(|kv| kv.strip_prefix("Coref="))
        .filter(|v| !v.is_empty())
        .map(str::to_string);
    Ok(Ok(Token {
        index,
        form: cols[1].to_string(),
        lemma: cols[2].to_string(),
        upos: cols[3].to_string(),
        xpos: cols[4].to_string(),
        feats: cols[5].to_string(),
        head,
        deprel: cols[7].to_string(),
        deps: cols[8].to_string(),
        misc,
        coref_canonical,
    }))
}

/// Reads every document from a CoNLL-U stream. Column-count and numeric
/// field errors abort; sentences whose heads do not form a tree are dropped
/// and reported in [`ReadOutcome::rejected`].
pub fn read_parses<R: BufRead>(reader: R) -> Result<ReadOutcome, ConlluError> {
    let mut outcome = ReadOutcome::default();
    let mut current_doc: Option<ParsedDocument> = None;
    let mut next_index = 0usize;
    let mut pending = Pending::new();
    let mut lineno = 0;

    let finish = |pending: Pending,
                      current_doc: &mut Option<ParsedDocument>,
                      next_index: &mut usize,
                      outcome: &mut ReadOutcome|
     -> Result<(), ConlluError> {
        if let Some(id) = pending.newdoc.clone() {
            if let Some(doc) = current_doc.take() {
                outcome.documents.push(doc);
            }
            *current_doc = Some(ParsedDocument {
                article_id: id,
                sentences: Vec::new(),
            });
            *next_index = 0;
        }
        if pending.tokens.is_empty() && pending.extra.is_empty() {
            // A trailing comment-only block (e.g. an empty document).
            return Ok(());
        }
        let Some(doc) = current_doc.as_mut() else {
            return Err(ConlluError::MissingDocument {
                line: pending.first_line,
            });
        };
        let Some(sent_id) = pending.sent_id else {
            return Err(ConlluError::MissingSentId {
                line: pending.first_line,
            });
        };
        let index = *next_index;
        *next_index += 1;
        match ParsedSentence::with_lines(
            doc.article_id.clone(),
            index,
            sent_id,
            pending.comments,
            pending.tokens,
            pending.extra,
        ) {
            Ok(s) => doc.sentences.push(s),
            Err(e) => {
                log::warn!("line {}: rejected sentence: {e}", pending.first_line);
                outcome.rejected.push(Diagnostic {
                    line: pending.first_line,
                    article_id: doc.article_id.clone(),
                    message: e.0,
                });
            }
        }
        Ok(())
    };

    for line in reader.lines() {
        lineno += 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            if !pending.is_empty() {
                finish(
                    std::mem::replace(&mut pending, Pending::new()),
                    &mut current_doc,
                    &mut next_index,
                    &mut outcome,
                )?;
            }
            continue;
        }
        if pending.is_empty() {
            pending.first_line = lineno;
        }
        if line.starts_with('#') {
            if let Some(id) = comment_value(line, "newdoc id") {
                pending.newdoc = Some(id.to_string());
            } else if let Some(id) = comment_value(line, "sent_id") {
                pending.sent_id = Some(id.to_string());
            }
            pending.comments.push(line.to_string());
            continue;
        }
        match parse_token(line, lineno)? {
            Ok(tok) => pending.tokens.push(tok),
            Err(raw) => pending.extra.push((pending.tokens.len(), raw)),
        }
    }
    if !pending.is_empty() {
        finish(pending, &mut current_doc, &mut next_index, &mut outcome)?;
    }
    if let Some(doc) = current_doc {
        outcome.documents.push(doc);
    }
    Ok(outcome)
}

fn write_token<W: Write>(w: &mut W, t: &Token) -> std::io::Result<()> {
    writeln!(
        w,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        t.index, t.form, t.lemma, t.upos, t.xpos, t.feats, t.head, t.deprel, t.deps, t.misc
    )
}

pub fn write_sentence<W: Write>(w: &mut W, s: &ParsedSentence) -> std::io::Result<()> {
    for c in &s.comments {
        writeln!(w, "{c}")?;
    }
    let mut extra = s.extra_lines.iter().peekable();
    for (i, t) in s.tokens.iter().enumerate() {
        while let Some((_, raw)) = extra.next_if(|(pos, _)| *pos == i) {
            writeln!(w, "{raw}")?;
        }
        write_token(w, t)?;
    }
    for (_, raw) in extra {
        writeln!(w, "{raw}")?;
    }
    writeln!(w)
}

pub fn write_documents<W: Write>(w: &mut W, docs: &[ParsedDocument]) -> std::io::Result<()> {
    for d in docs {
        for s in &d.sentences {
            write_sentence(w, s)?;
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn tok(index: usize, form: &str, head: usize, deprel: &str) -> Token {
        Token {
            index,
            form: form.into(),
            lemma: form.to_lowercase(),
            upos: "X".into(),
            xpos: "_".into(),
            feats: "_".into(),
            head,
            deprel: deprel.into(),
            deps: "_".into(),
            misc: "_".into(),
            coref_canonical: None,
        }
    }

    const TWO_DOCS: &str = "# newdoc id = a1\n# sent_id = a1-0\n# text = Scientists agree\n1\tScientists\tscientist\tNOUN\tNNS\t_\t2\tnsubj\t_\t_\n2\tagree\tagree\tVERB\tVBP\t_\t0\troot\t_\tSpaceAfter=No\n\n# newdoc id = a2\n# sent_id = a2-0\n1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n1\tdo\tdo\tAUX\tVBP\t_\t3\taux\t_\t_\n2\tn't\tnot\tPART\tRB\t_\t3\tneg\t_\t_\n3\tknow\tknow\tVERB\tVB\t_\t0\troot\t_\tCoref=Exxon\n\n";

    #[test]
    fn reads_minimal_sentence_and_two_documents() {
        let out = read_parses(TWO_DOCS.as_bytes()).unwrap();
        assert_eq!(out.documents.len(), 2);
        let s = &out.documents[0].sentences[0];
        assert_eq!(s.len(), 2);
        assert_eq!(s.root(), 2);
        assert_eq!(s.sent_id, "a1-0");
        assert_eq!(out.documents[1].sentences[0].token(3).coref_canonical.as_deref(), Some("Exxon"));
        assert!(out.rejected.is_empty());
    }

    #[test]
    fn roundtrips_byte_identically() {
        let out = read_parses(TWO_DOCS.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_documents(&mut buf, &out.documents).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), TWO_DOCS);
    }

    #[test]
    fn cycle_rejects_sentence_but_keeps_document() {
        let input = "# newdoc id = d\n# sent_id = s0\n1\ta\ta\tX\t_\t_\t2\tdep\t_\t_\n2\tb\tb\tX\t_\t_\t1\tdep\t_\t_\n3\tc\tc\tX\t_\t_\t0\troot\t_\t_\n\n# sent_id = s1\n1\tok\tok\tX\t_\t_\t0\troot\t_\t_\n\n";
        let out = read_parses(input.as_bytes()).unwrap();
        assert_eq!(out.documents.len(), 1);
        assert_eq!(out.documents[0].sentences.len(), 1);
        assert_eq!(out.documents[0].sentences[0].sentence_index, 1);
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].line, 1);
        assert!(out.rejected[0].message.contains("cycle") || out.rejected[0].message.contains("root"));
    }

    #[test]
    fn column_count_is_a_hard_error() {
        let input = "# newdoc id = d\n# sent_id = s\n1\ta\ta\tX\t_\t_\t0\n\n";
        assert!(matches!(read_parses(input.as_bytes()), Err(ConlluError::Columns { line: 3, found: 7 })));
    }

    #[test]
    fn missing_newdoc_and_sent_id() {
        let input = "# sent_id = s\n1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n\n";
        assert!(matches!(read_parses(input.as_bytes()), Err(ConlluError::MissingDocument { .. })));
        let input = "# newdoc id = d\n1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n\n";
        assert!(matches!(read_parses(input.as_bytes()), Err(ConlluError::MissingSentId { .. })));
    }

    #[test]
    fn tree_checks() {
        assert!(ParsedSentence::new("d", 0, "s", vec![tok(1, "a", 0, "root"), tok(2, "b", 0, "root")]).is_err());
        assert!(ParsedSentence::new("d", 0, "s", vec![tok(1, "a", 3, "x")]).is_err());
        assert!(ParsedSentence::new("d", 0, "s", vec![tok(2, "a", 0, "root")]).is_err());
    }

    /// Six tokens: "He said that ice is melting" with ccomp rooted at 4.
    fn six_token_fixture() -> ParsedSentence {
        let heads = [2, 0, 6, 6, 6, 2];
        let labels = ["nsubj", "root", "mark", "nsubj", "aux", "ccomp"];
        let forms = ["He", "said", "that", "ice", "is", "melting"];
        let tokens = (0..6).map(|i| tok(i + 1, forms[i], heads[i], labels[i])).collect();
        ParsedSentence::new("d", 0, "s", tokens).unwrap()
    }

    /// Reachability oracle straight off the head array: j is in the subtree
    /// of r iff r lies on j's head chain.
    fn brute_subtree(heads: &[usize], root: usize) -> Vec<usize> {
        (1..=heads.len())
            .filter(|&j| {
                let mut cur = j;
                loop {
                    if cur == root {
                        return true;
                    }
                    if cur == 0 {
                        return false;
                    }
                    cur = heads[cur - 1];
                }
            })
            .collect()
    }

    #[test]
    fn subtree_examples() {
        let s = six_token_fixture();
        assert_eq!(subtree(&s, s.root()), vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(subtree(&s, 1), vec![1]);
        let heads: Vec<usize> = s.tokens.iter().map(|t| t.head).collect();
        for r in 1..=6 {
            assert_eq!(subtree(&s, r), brute_subtree(&heads, r));
        }
        assert_eq!(subtree(&s, 6), vec![3, 4, 5, 6]);
    }

    use proptest::prelude::*;

    /// Random trees: token i+1 attaches to a random earlier position, then
    /// indices are permuted.
    fn random_tree() -> impl Strategy<Value = Vec<usize>> {
        (1usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(any::<prop::sample::Index>(), n),
                Just((1..=n).collect::<Vec<usize>>()).prop_shuffle(),
            )
                .prop_map(move |(picks, perm)| {
                    // Build in "order" space, then map through the permutation.
                    let mut heads = vec![0usize; n];
                    for k in 1..n {
                        let parent_order = picks[k].index(k);
                        heads[perm[k] - 1] = perm[parent_order];
                    }
                    heads[perm[0] - 1] = 0;
                    heads
                })
        })
    }

    proptest! {
        #[test]
        fn subtree_properties(heads in random_tree()) {
            let tokens = heads.iter().enumerate().map(|(i, &h)| tok(i + 1, "w", h, "dep")).collect();
            let s = ParsedSentence::new("d", 0, "s", tokens).unwrap();
            let whole = subtree(&s, s.root());
            prop_assert_eq!(whole.len(), s.len());
            for i in 1..=s.len() {
                prop_assert_eq!(subtree(&s, i), brute_subtree(&heads, i));
                let kids = s.children(i);
                for (a, &x) in kids.iter().enumerate() {
                    for &y in &kids[a + 1..] {
                        let sx = subtree(&s, x);
                        prop_assert!(subtree(&s, y).iter().all(|t| !sx.contains(t)));
                    }
                }
            }
        }
    }
}
