//! Pretty-printer: renders an AST back to query text. `parse(print(q))`
//! is structurally equal to `q`.

use alloc::format;
use alloc::string::String;

use super::ast::*;
use super::token::format_duration_ms;

pub fn print(q: &StarqlQuery) -> String {
    let mut out = String::new();
    for (prefix, iri) in &q.prefixes {
        out.push_str(&format!("PREFIX {prefix} : <{iri}>\n"));
    }
    if let Some(p) = &q.pulse {
        let start = match &p.start {
            TimeAnchor::Now => String::from("NOW"),
            TimeAnchor::AbsoluteMs(ms) => format!("{ms}"),
        };
        out.push_str(&format!(
            "CREATE PULSE {} WITH START = {start}, FREQUENCY = {}\n",
            p.name,
            format_duration_ms(p.frequency_ms)
        ));
    }
    out.push_str(&format!("CREATE STREAM {} AS\n", q.output_stream));
    match &q.output {
        OutputForm::Construct { subject_var, concept } => {
            out.push_str(&format!("CONSTRUCT GRAPH NOW {{ ?{subject_var} a {concept} }}\n"));
        }
        OutputForm::Select { vars } => {
            out.push_str("SELECT");
            for v in vars {
                out.push_str(&format!(" ?{v}"));
            }
            out.push('\n');
        }
    }
    if let (Some(onto), Some(data)) = (&q.static_ontology, &q.static_data) {
        out.push_str(&format!("FROM STATIC ONTOLOGY {onto}, DATA {data}\n"));
    }
    if !q.where_triples.is_empty() {
        out.push_str("WHERE { ");
        for (i, t) in q.where_triples.iter().enumerate() {
            if i > 0 {
                out.push_str(" . ");
            }
            out.push_str(&print_term(&t.subject));
            match &t.predicate {
                WherePredicate::IsA => out.push_str(" a "),
                WherePredicate::Named(n) => out.push_str(&format!(" {n} ")),
            }
            out.push_str(&print_term(&t.object));
        }
        out.push_str(" }\n");
    }
    out.push_str("FROM STREAM");
    for s in &q.stream_sources {
        out.push_str(&format!("\n  {}", s.name));
        if let Some(sb) = s.set_back_ms {
            out.push_str(&format!(" {} <-", format_duration_ms(sb)));
        }
        out.push_str(&format!("[NOW - {}, NOW]", format_duration_ms(s.range_ms)));
        if let Some(sl) = s.slide_ms {
            out.push_str(&format!("-> {}", format_duration_ms(sl)));
        }
    }
    out.push('\n');
    if let Some(p) = &q.using_pulse {
        out.push_str(&format!("USING PULSE {p}\n"));
    }
    if let Some(s) = &q.sequencing {
        out.push_str(&format!("SEQUENCE BY {} AS {}\n", s.strategy, s.alias));
    }
    if let Some(h) = &q.having {
        out.push_str("HAVING ");
        print_having(h, &mut out);
        out.push('\n');
    }
    out
}

fn print_term(t: &PatternTerm) -> String {
    match t {
        PatternTerm::Var(v) => format!("?{v}"),
        PatternTerm::Name(n) => n.clone(),
        PatternTerm::Number(n) => n.to_string(),
    }
}

fn print_having(h: &HavingExpr, out: &mut String) {
    match h {
        HavingExpr::Quantified { quantifier, index_var, sequence, graphs, filter } => {
            let q = match quantifier {
                QuantifierKind::Exists => "EXISTS",
                QuantifierKind::Forall => "FORALL",
            };
            out.push_str(&format!("{q} {index_var} IN {sequence} ("));
            for (i, g) in graphs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" AND ");
                }
                let idx = if g.index.offset == 0 {
                    g.index.var.clone()
                } else {
                    format!("{} + {}", g.index.var, g.index.offset)
                };
                out.push_str(&format!("GRAPH {idx} {{ "));
                for (j, t) in g.triples.iter().enumerate() {
                    if j > 0 {
                        out.push_str(" . ");
                    }
                    out.push_str(&format!(
                        "{} {} {}",
                        print_term(&t.subject),
                        t.predicate,
                        print_term(&t.value)
                    ));
                }
                out.push_str(" }");
            }
            out.push_str(") HAVING ");
            print_having(filter, out);
        }
        HavingExpr::Compare { op, left, right } => {
            print_num(left, out);
            out.push_str(&format!(" {} ", op.symbol()));
            print_num(right, out);
        }
        HavingExpr::And(l, r) => {
            out.push('(');
            print_having(l, out);
            out.push_str(" AND ");
            print_having(r, out);
            out.push(')');
        }
        HavingExpr::Or(l, r) => {
            out.push('(');
            print_having(l, out);
            out.push_str(" OR ");
            print_having(r, out);
            out.push(')');
        }
        HavingExpr::Not(inner) => {
            out.push_str("NOT (");
            print_having(inner, out);
            out.push(')');
        }
    }
}

fn print_num(e: &NumExpr, out: &mut String) {
    match e {
        NumExpr::Var(v) => out.push_str(&format!("?{v}")),
        NumExpr::Const(c) => out.push_str(&format!("{c}")),
        NumExpr::Call(f, args) => {
            out.push_str(f);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_num(a, out);
            }
            out.push(')');
        }
        NumExpr::Add(l, r) => print_binary(l, "+", r, out),
        NumExpr::Sub(l, r) => print_binary(l, "-", r, out),
        NumExpr::Mul(l, r) => print_binary(l, "*", r, out),
        NumExpr::Div(l, r) => print_binary(l, "/", r, out),
    }
}

fn print_binary(l: &NumExpr, op: &str, r: &NumExpr, out: &mut String) {
    out.push('(');
    print_num(l, out);
    out.push_str(&format!(" {op} "));
    print_num(r, out);
    out.push(')');
}
