"""Query composition: templates, masking, ablations, sanitization."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scale_sense.query import (
    AblationFlags,
    QueryContext,
    Task,
    compose_for_task,
    compose_quantity_query,
    compose_type_query,
    compose_unit_query,
    plain_name,
    sanitize_field,
)

LASAGNA = QueryContext(
    target_desc_name="ground beef",
    title="Beef and Mushroom Lasagna",
    tags=("main-dish",),
    other_ingredients=("onion", "garlic"),
    servings=4,
)


class TestTypeQuery:
    def test_full_template(self):
        q = compose_type_query(LASAGNA)
        assert q.text == (
            "[CLS] ground beef [SEP] [MASK] [SEP] Beef and Mushroom Lasagna "
            "[SEP] main-dish [SEP] onion [SEP2] garlic [SEP] 4"
        )
        assert q.task is Task.TYPE

    def test_target_only_ablation(self):
        q = compose_type_query(LASAGNA, AblationFlags.none())
        assert q.text == "[CLS] ground beef [SEP] [MASK]"

    def test_empty_tag_list_omitted(self):
        context = QueryContext(
            target_desc_name="ground beef",
            title="Beef and Mushroom Lasagna",
            tags=(),
            other_ingredients=("onion",),
            servings=4,
        )
        q = compose_type_query(context)
        assert q.text == (
            "[CLS] ground beef [SEP] [MASK] [SEP] Beef and Mushroom Lasagna [SEP] onion [SEP] 4"
        )

    def test_single_attribute_ablation(self):
        q = compose_type_query(LASAGNA, AblationFlags(True, False, False, False))
        assert q.text == "[CLS] ground beef [SEP] [MASK] [SEP] Beef and Mushroom Lasagna"


class TestUnitAndQuantityQueries:
    def test_type_word_inserted_after_mask(self):
        q = compose_unit_query(LASAGNA, "weight")
        assert q.text == (
            "[CLS] ground beef [SEP] [MASK] [SEP] weight [SEP] Beef and Mushroom Lasagna "
            "[SEP] main-dish [SEP] onion [SEP2] garlic [SEP] 4"
        )

    def test_all_off(self):
        q = compose_unit_query(LASAGNA, "weight", AblationFlags.none())
        assert q.text == "[CLS] ground beef [SEP] [MASK] [SEP] weight"

    def test_quantity_query_matches_unit_query(self):
        u = compose_unit_query(LASAGNA, "volume")
        q = compose_quantity_query(LASAGNA, "volume")
        assert q.text == u.text
        assert q.task is Task.QUANTITY

    def test_format_independent_of_word_source(self):
        # predicted or ground-truth type words produce the same shape
        assert compose_unit_query(LASAGNA, "weight").text.count("[MASK]") == 1
        assert compose_unit_query(LASAGNA, "volume").text.count("[MASK]") == 1

    def test_bad_type_word_rejected(self):
        with pytest.raises(ValueError):
            compose_unit_query(LASAGNA, "mass")

    def test_dispatch(self):
        assert compose_for_task(Task.TYPE, LASAGNA).task is Task.TYPE
        assert compose_for_task(Task.UNIT, LASAGNA, "weight").task is Task.UNIT
        with pytest.raises(ValueError):
            compose_for_task(Task.QUANTITY, LASAGNA)


class TestPlainName:
    def test_bell_pepper_example(self):
        assert plain_name("medium red bell pepper, diced") == "red bell pepper"

    def test_leading_descriptors(self):
        assert plain_name("thinly sliced roast beef") == "roast beef"

    def test_all_descriptors_falls_back(self):
        assert plain_name("ground") == "ground"

    def test_flag_wires_through(self):
        context = QueryContext(target_desc_name="medium red bell pepper, diced")
        q = compose_type_query(
            context, AblationFlags(False, False, False, False, use_descriptive_name=False)
        )
        assert q.text == "[CLS] red bell pepper [SEP] [MASK]"


class TestSanitization:
    def test_specials_stripped(self):
        assert sanitize_field("evil [SEP] name") == "evil name"
        assert sanitize_field("[SEP2] [CLS] [MASK] x") == "x"

    def test_sep2_not_left_as_two(self):
        assert "2" not in sanitize_field("[SEP2]")

    def test_whitespace_collapsed(self):
        assert sanitize_field("a\n  b\t c") == "a b c"

    def test_injected_tokens_do_not_add_masks(self):
        context = QueryContext(
            target_desc_name="beef [MASK]",
            title="[SEP] [SEP] title",
            tags=("[MASK]",),
            other_ingredients=("x [SEP2] y",),
            servings=4,
        )
        q = compose_type_query(context)
        assert q.text.count("[MASK]") == 1


contexts = st.builds(
    QueryContext,
    target_desc_name=st.text(min_size=1, max_size=30),
    title=st.text(max_size=30),
    tags=st.tuples(st.text(max_size=10), st.text(max_size=10)),
    other_ingredients=st.tuples(st.text(max_size=10)),
    servings=st.one_of(st.none(), st.floats(min_value=0.5, max_value=24)),
)

flag_sets = st.builds(
    AblationFlags,
    use_title=st.booleans(),
    use_tags=st.booleans(),
    use_other_ingredients=st.booleans(),
    use_servings=st.booleans(),
    use_descriptive_name=st.booleans(),
)


class TestProperties:
    @given(context=contexts, flags=flag_sets)
    @settings(max_examples=200)
    def test_exactly_one_mask(self, context, flags):
        for q in (
            compose_type_query(context, flags),
            compose_unit_query(context, "weight", flags),
            compose_quantity_query(context, "volume", flags),
        ):
            assert q.text.count("[MASK]") == 1

    @given(context=contexts, flags=flag_sets)
    @settings(max_examples=200)
    def test_ablation_only_removes_segments(self, context, flags):
        # the plain-name flag substitutes text rather than removing a segment
        flags = AblationFlags(
            flags.use_title, flags.use_tags, flags.use_other_ingredients,
            flags.use_servings, use_descriptive_name=True,
        )
        full = compose_type_query(context).text.split(" [SEP] ")
        ablated = compose_type_query(context, flags).text.split(" [SEP] ")
        # ablated segment list is a subsequence of the full segment list
        it = iter(full)
        assert all(seg in it for seg in ablated)

    @given(
        name_a=st.text(alphabet="abc xyz", min_size=1, max_size=12),
        name_b=st.text(alphabet="abc xyz", min_size=1, max_size=12),
        title=st.text(alphabet="abc xyz", min_size=1, max_size=12),
    )
    @settings(max_examples=200)
    def test_injective_over_nonempty_fields(self, name_a, name_b, title):
        ctx_a = QueryContext(name_a, title, ("t",), ("o",), 4)
        ctx_b = QueryContext(name_b, title, ("t",), ("o",), 4)
        same_after_sanitize = sanitize_field(name_a) == sanitize_field(name_b)
        texts_equal = compose_type_query(ctx_a).text == compose_type_query(ctx_b).text
        assert texts_equal == same_after_sanitize
