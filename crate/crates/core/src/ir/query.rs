use std::collections::BTreeSet;

use thiserror::Error;

use super::{CaseType, CombType, Expr, FuncDecl, QName, Rule, TypeDecl, TypeExpr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0} is external and has no body")]
pub struct ExternalFunction(pub QName);

/// True iff an `Or` node occurs anywhere in `e`.
pub fn or_in_expr(e: &Expr) -> bool {
    match e {
        Expr::Var(_) => false,
        Expr::Lit(_) => false,
        Expr::Comb { args, .. } => args.iter().any(or_in_expr),
        Expr::Case {
            scrutinee,
            branches,
            ..
        } => or_in_expr(scrutinee) || branches.iter().any(|(_, b)| or_in_expr(b)),
        Expr::Or(_, _) => true,
        Expr::Free { body, .. } => or_in_expr(body),
    }
}

/// True iff a `Free` node occurs anywhere in `e`.
pub fn free_var_in_expr(e: &Expr) -> bool {
    match e {
        Expr::Var(_) | Expr::Lit(_) => false,
        Expr::Comb { args, .. } => args.iter().any(free_var_in_expr),
        Expr::Case {
            scrutinee,
            branches,
            ..
        } => free_var_in_expr(scrutinee) || branches.iter().any(|(_, b)| free_var_in_expr(b)),
        Expr::Or(l, r) => free_var_in_expr(l) || free_var_in_expr(r),
        Expr::Free { .. } => true,
    }
}

/// True iff a rigid (residuating) `Case` occurs anywhere in `e`.
pub fn rigid_case_in_expr(e: &Expr) -> bool {
    match e {
        Expr::Case {
            ctype: CaseType::Rigid,
            ..
        } => true,
        _ => e.children().into_iter().any(rigid_case_in_expr),
    }
}

/// Names of the functions called in `f`'s body, sorted and deduplicated.
/// Constructor applications are not calls.
pub fn called_functions(f: &FuncDecl) -> Result<BTreeSet<QName>, ExternalFunction> {
    let body = match &f.rule {
        Rule::Rule { body, .. } => body,
        Rule::External(_) => return Err(ExternalFunction(f.name.clone())),
    };
    let mut out = BTreeSet::new();
    let mut stack = vec![body];
    while let Some(e) = stack.pop() {
        if let Expr::Comb {
            ctype: CombType::FuncCall,
            name,
            ..
        } = e
        {
            out.insert(name.clone());
        }
        stack.extend(e.children());
    }
    Ok(out)
}

/// Type constructors mentioned in the argument types of `t`'s constructors.
pub fn used_types(t: &TypeDecl) -> BTreeSet<QName> {
    fn walk(t: &TypeExpr, out: &mut BTreeSet<QName>) {
        match t {
            TypeExpr::TVar(_) => {}
            TypeExpr::FuncType(d, r) => {
                walk(d, out);
                walk(r, out);
            }
            TypeExpr::TCons { name, args } => {
                out.insert(name.clone());
                for a in args {
                    walk(a, out);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    for c in &t.constructors {
        for a in &c.args {
            walk(a, &mut out);
        }
    }
    out
}

/// True iff a function type occurs anywhere inside `t`.
pub fn type_expr_has_func(t: &TypeExpr) -> bool {
    match t {
        TypeExpr::TVar(_) => false,
        TypeExpr::FuncType(_, _) => true,
        TypeExpr::TCons { args, .. } => args.iter().any(type_expr_has_func),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{ConsDecl, Literal, Pattern, Visibility};

    fn q(n: &str) -> QName {
        QName::new("M", n)
    }

    fn func(name: &str, params: Vec<u32>, body: Expr) -> FuncDecl {
        FuncDecl {
            name: q(name),
            arity: params.len(),
            visibility: Visibility::Public,
            type_sig: TypeExpr::TVar(0),
            rule: Rule::Rule { params, body },
        }
    }

    fn tcons(n: &str, args: Vec<TypeExpr>) -> TypeExpr {
        TypeExpr::TCons {
            name: QName::new("Prelude", n),
            args,
        }
    }

    #[test]
    fn or_in_expr_examples() {
        assert!(or_in_expr(&Expr::or(Expr::Var(1), Expr::Var(2))));
        assert!(!or_in_expr(&Expr::Var(1)));
        let nested = Expr::case(
            CaseType::Flex,
            Expr::Var(1),
            vec![(
                Pattern::LitPattern(Literal::Int(0)),
                Expr::or(Expr::Lit(Literal::Int(0)), Expr::Lit(Literal::Int(1))),
            )],
        );
        assert!(or_in_expr(&nested));
    }

    #[test]
    fn free_var_in_expr_examples() {
        assert!(!free_var_in_expr(&Expr::Lit(Literal::Int(42))));
        let e = Expr::func(q("f"), vec![Expr::free(vec![3], Expr::Var(3))]);
        assert!(free_var_in_expr(&e));
        assert!(!or_in_expr(&e));
    }

    #[test]
    fn called_functions_excludes_constructors_and_dedups() {
        let g = func("g", vec![], Expr::func(q("f"), vec![Expr::func(q("f"), vec![])]));
        assert_eq!(called_functions(&g).unwrap(), BTreeSet::from([q("f")]));

        let c = func("c", vec![], Expr::cons(q("True"), vec![]));
        assert!(called_functions(&c).unwrap().is_empty());

        let len = func(
            "len",
            vec![1],
            Expr::case(
                CaseType::Flex,
                Expr::Var(1),
                vec![
                    (
                        Pattern::ConsPattern { name: q("Nil"), vars: vec![] },
                        Expr::Lit(Literal::Int(0)),
                    ),
                    (
                        Pattern::ConsPattern { name: q("Cons"), vars: vec![2, 3] },
                        Expr::func(
                            QName::new("Prelude", "+"),
                            vec![Expr::Lit(Literal::Int(1)), Expr::func(q("len"), vec![Expr::Var(3)])],
                        ),
                    ),
                ],
            ),
        );
        let called: Vec<_> = called_functions(&len).unwrap().into_iter().collect();
        assert_eq!(called, vec![q("len"), QName::new("Prelude", "+")]);
    }

    #[test]
    fn called_functions_of_external_is_error() {
        let f = FuncDecl {
            name: q("prim"),
            arity: 0,
            visibility: Visibility::Public,
            type_sig: TypeExpr::TVar(0),
            rule: Rule::External("prim".into()),
        };
        assert_eq!(called_functions(&f), Err(ExternalFunction(q("prim"))));
    }

    #[test]
    fn used_types_examples() {
        let a = TypeExpr::TVar(0);
        let list = TypeDecl {
            name: QName::new("Prelude", "List"),
            visibility: Visibility::Public,
            params: vec![0],
            constructors: vec![
                ConsDecl { name: QName::new("Prelude", "[]"), arity: 0, args: vec![] },
                ConsDecl {
                    name: QName::new("Prelude", ":"),
                    arity: 2,
                    args: vec![a.clone(), tcons("List", vec![a.clone()])],
                },
            ],
            external: false,
        };
        assert_eq!(used_types(&list), BTreeSet::from([QName::new("Prelude", "List")]));

        let color = TypeDecl {
            name: q("Color"),
            visibility: Visibility::Public,
            params: vec![],
            constructors: ["Red", "Green"]
                .iter()
                .map(|n| ConsDecl { name: q(n), arity: 0, args: vec![] })
                .collect(),
            external: false,
        };
        assert!(used_types(&color).is_empty());

        let pred = TypeDecl {
            name: q("P"),
            visibility: Visibility::Public,
            params: vec![0],
            constructors: vec![ConsDecl {
                name: q("MkP"),
                arity: 1,
                args: vec![TypeExpr::FuncType(
                    Box::new(tcons("List", vec![a])),
                    Box::new(tcons("Bool", vec![])),
                )],
            }],
            external: false,
        };
        assert_eq!(
            used_types(&pred),
            BTreeSet::from([QName::new("Prelude", "Bool"), QName::new("Prelude", "List")])
        );
    }

    #[test]
    fn rigid_case_detection() {
        let flex = Expr::case(
            CaseType::Flex,
            Expr::Var(1),
            vec![(Pattern::LitPattern(Literal::Int(0)), Expr::Var(1))],
        );
        assert!(!rigid_case_in_expr(&flex));
        let rigid = Expr::func(
            q("f"),
            vec![Expr::case(
                CaseType::Rigid,
                Expr::Var(1),
                vec![(Pattern::LitPattern(Literal::Int(0)), Expr::Var(1))],
            )],
        );
        assert!(rigid_case_in_expr(&rigid));
    }
}
