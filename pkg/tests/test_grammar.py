import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stlclab import _pydecode
from stlclab.core import (
    ArrowType,
    BaseType,
    ErrorType,
    TypingContext,
    Var,
    arrow_count,
)
from stlclab.grammar import (
    KERNEL_BACKEND,
    NT_TERM,
    NT_TYPE,
    GrammarError,
    batch_accuracy,
    build_cst,
    build_rule_table,
    decode_greedy,
    decode_rule_ids,
    encode_type_rules,
    enumerate_types,
    exact_match,
    load_rules_file,
    one_hot_rows,
    serialize_rules,
    write_rules_file,
)
from stlclab.syntax import parse_term, print_term

T = BaseType("T")
TT = ArrowType(T, T)


def types():
    return st.recursive(st.just(T), lambda c: st.builds(ArrowType, c, c), max_leaves=24)


class TestRuleTable:
    def test_type_subgrammar_has_exactly_two_content_rules(self, table):
        type_rules = [r for r in table.rules if r.lhs == NT_TYPE]
        assert [r.rhs for r in type_rules] == [(NT_TYPE, "->", NT_TYPE), ("T",)]

    def test_term_variable_alternatives(self, ctx):
        t = build_rule_table(ctx, n_bound_names=0)
        variables = [r.rhs[0] for r in t.rules if r.lhs == NT_TERM and len(r.rhs) == 1]
        assert variables == ["x"]

    def test_default_pool_holds_32_binders(self, table):
        variables = [r.rhs[0] for r in table.rules if r.lhs == NT_TERM and len(r.rhs) == 1]
        assert variables == ["x"] + [f"bv{i}" for i in range(32)]

    def test_special_ids_distinct_from_content(self, table):
        content = {r.rule_id for r in table.rules}
        specials = {table.sos_id, table.eos_id, table.pad_id}
        assert len(specials) == 3 and not (content & specials)

    def test_determinism_byte_identical(self, ctx):
        a = serialize_rules(build_rule_table(ctx, 32))
        b = serialize_rules(build_rule_table(ctx, 32))
        assert a.encode() == b.encode()

    def test_rules_file_round_trip(self, table, tmp_path):
        path = tmp_path / "rules.txt"
        write_rules_file(table, path)
        loaded = load_rules_file(path)
        assert loaded.rules == table.rules
        assert (loaded.sos_id, loaded.eos_id, loaded.pad_id) == (
            table.sos_id,
            table.eos_id,
            table.pad_id,
        )

    def test_ids_follow_order_of_appearance(self, table):
        assert [r.rule_id for r in table.rules] == list(range(len(table.rules)))


class TestCst:
    def test_base_type_cst(self, table):
        cst = build_cst(T, table)
        assert cst.root.symbol == NT_TYPE
        assert cst.root.producing_rule == table.base_type_rule("T").rule_id
        assert [c.symbol for c in cst.root.children] == ["T"]
        assert sum(not n.is_terminal for n in cst.nodes) == 1

    def test_arrow_cst_hand_expansion(self, table):
        cst = build_cst(TT, table)
        assert cst.root.producing_rule == table.arrow_rule().rule_id
        assert [c.symbol for c in cst.root.children] == [NT_TYPE, "->", NT_TYPE]
        left, _, right = cst.root.children
        assert [c.symbol for c in left.children] == ["T"]
        assert [c.symbol for c in right.children] == ["T"]

    def test_var_term_cst(self, table):
        cst = build_cst(Var("x"), table)
        assert cst.root.symbol == NT_TERM
        assert [c.symbol for c in cst.root.children] == ["x"]

    def test_bfs_index_increases_from_parent(self, table, ctx):
        term = parse_term("[ lambda bv0 : (T -> T) -> T . [bv0 lambda bv1 : T . x] x ]", ctx)
        cst = build_cst(term, table)
        for node in cst.nodes:
            if node.parent is not None:
                assert node.bfs_index > node.parent.bfs_index
        # level order really is level order
        assert [n.bfs_index for n in cst.nodes] == list(range(len(cst.nodes)))

    def test_frontier_matches_print_minus_ignored(self, table, ctx):
        term = parse_term("lambda bv0 : (T -> T) -> T . x", ctx)
        cst = build_cst(term, table)
        printed = print_term(term).replace("(", " ").replace(")", " ").split()
        assert cst.frontier() == printed

    def test_unrenamed_symbol_is_rejected(self, table):
        with pytest.raises(GrammarError, match="closed vocabulary"):
            build_cst(Var("zz"), table)

    def test_internal_nodes_carry_rules_leaves_do_not(self, table, ctx):
        cst = build_cst(parse_term("lambda bv0 : T . bv0", ctx), table)
        for node in cst.nodes:
            if node.is_terminal:
                assert not node.children
            else:
                assert node.producing_rule is not None


class TestEncode:
    def test_examples(self, table):
        r_arrow = table.arrow_rule().rule_id
        r_t = table.base_type_rule("T").rule_id
        assert encode_type_rules(T, table) == [r_t]
        assert encode_type_rules(TT, table) == [r_arrow, r_t, r_t]
        assert encode_type_rules(ArrowType(TT, T), table) == [r_arrow, r_arrow, r_t, r_t, r_t]

    @given(types())
    def test_rule_count_law(self, ty):
        table = build_rule_table(TypingContext.global_context())
        assert len(encode_type_rules(ty, table)) == 2 * arrow_count(ty) + 1

    def test_error_type_has_no_encoding(self, table):
        with pytest.raises(GrammarError):
            encode_type_rules(ErrorType(), table)


class TestDecode:
    def test_one_hot_round_trip_examples(self, table):
        for ty in (T, TT, ArrowType(TT, T), ArrowType(T, TT)):
            rows = one_hot_rows(encode_type_rules(ty, table), table)
            assert decode_greedy(rows, table) == ty

    def test_rule_with_no_pending_slot(self, table):
        r_t = table.base_type_rule("T").rule_id
        assert isinstance(decode_rule_ids([r_t, r_t], table), ErrorType)

    def test_unfilled_slot_at_eos(self, table):
        r_arrow = table.arrow_rule().rule_id
        r_t = table.base_type_rule("T").rule_id
        ids = [r_arrow, r_t, table.eos_id]
        assert isinstance(decode_rule_ids(ids, table), ErrorType)

    def test_rows_exhausted_with_pending_slots(self, table):
        r_arrow = table.arrow_rule().rule_id
        assert isinstance(decode_rule_ids([r_arrow], table), ErrorType)

    def test_empty_prediction(self, table):
        assert isinstance(decode_greedy(np.zeros((0, table.n_ids)), table), ErrorType)
        assert isinstance(decode_rule_ids([], table), ErrorType)

    def test_pad_rows_are_ignored(self, table):
        r_t = table.base_type_rule("T").rule_id
        assert decode_rule_ids([table.pad_id, r_t, table.pad_id], table) == T

    def test_rows_after_eos_are_ignored(self, table):
        r_t = table.base_type_rule("T").rule_id
        garbage = [r_t, table.eos_id, r_t, r_t, 0]
        assert decode_rule_ids(garbage, table) == T

    def test_sos_mid_sequence_is_inapplicable(self, table):
        r_t = table.base_type_rule("T").rule_id
        assert isinstance(decode_rule_ids([table.sos_id, r_t], table), ErrorType)

    def test_term_rule_never_fits_a_type_slot(self, table):
        assert isinstance(decode_rule_ids([0], table), ErrorType)

    def test_argmax_ties_break_to_lowest_id(self, table):
        r_arrow = table.arrow_rule().rule_id
        r_t = table.base_type_rule("T").rule_id
        row = np.zeros(table.n_ids)
        row[r_arrow] = row[r_t] = 1.0  # tie: the arrow rule has the lower id
        rows = np.vstack([row, one_hot_rows([r_t, r_t], table)])
        assert decode_greedy(rows, table) == TT

    def test_malformed_row_width_is_a_contract_violation(self, table):
        with pytest.raises(ValueError, match="rows"):
            decode_greedy(np.zeros((3, table.n_ids + 1)), table)

    @given(st.lists(st.integers(min_value=0, max_value=39), max_size=40))
    @settings(max_examples=300)
    def test_totality_on_arbitrary_ids(self, ids):
        table = build_rule_table(TypingContext.global_context())
        result = decode_rule_ids(ids, table)
        assert isinstance(result, (BaseType, ArrowType, ErrorType))

    def test_kernel_parity_compiled_vs_pure(self, table):
        if KERNEL_BACKEND != "compiled":
            pytest.skip("compiled kernel unavailable; nothing to compare")
        from stlclab import _speedups

        rng = np.random.default_rng(7)
        for _ in range(3000):
            ids = np.ascontiguousarray(
                rng.integers(0, table.n_ids, size=int(rng.integers(0, 33))), dtype=np.intc
            )
            fast = _speedups.consume_rules(ids, *table.kernel_args())
            pure = _pydecode.consume_rules(ids, *table.kernel_args())
            assert (fast is None and pure is None) or list(fast) == list(pure)


class TestRoundTrip:
    def test_exhaustive_depth_5(self, table):
        for ty in enumerate_types(5):
            rows = one_hot_rows(encode_type_rules(ty, table), table)
            assert decode_greedy(rows, table) == ty

    def test_exhaustive_depth_6_codec(self, table):
        # 458,330 types; uses the raw id decode to keep this under a minute.
        for ty in enumerate_types(6):
            assert decode_rule_ids(encode_type_rules(ty, table), table) == ty

    def test_enumeration_counts(self):
        # |types of depth <= d| satisfies c(d) = c(d-1)^2 + 1.
        sizes = [len(enumerate_types(d)) for d in range(1, 6)]
        assert sizes == [1, 2, 5, 26, 677]

    def test_enumeration_depths_exhaustive(self):
        from stlclab.core import type_depth

        for d in range(1, 5):
            got = {print_term_key(ty) for ty in enumerate_types(d)}
            assert all(type_depth(ty) <= d for ty in enumerate_types(d))
            assert len(got) == len(enumerate_types(d))


def print_term_key(ty):
    from stlclab.syntax import print_type

    return print_type(ty)


class TestAccuracy:
    def test_exact_match(self):
        assert exact_match(TT, TT)
        assert not exact_match(ErrorType(), T)
        assert not exact_match(T, ErrorType())
        assert not exact_match(ErrorType(), ErrorType())
        assert not exact_match(T, TT)

    def test_batch_accuracy(self):
        assert batch_accuracy([T, TT], [T, T]) == 0.5
        assert batch_accuracy([T], [T]) == 1.0

    def test_batch_accuracy_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            batch_accuracy([T], [T, T])
