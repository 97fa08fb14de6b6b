import importlib
import math

import numpy as np
import pytest


def load_vectors():
    return importlib.import_module('vectors')


def test_embedding_vector_rejects_bad_shapes_and_values() -> None:
    vectors = load_vectors()

    with pytest.raises(vectors.EmbeddingError, match='dim=3'):
        vectors.EmbeddingVector(values=(1.0, 2.0), dim=3, provider_id='p', model_id='m')
    with pytest.raises(vectors.EmbeddingError, match='non-finite'):
        vectors.EmbeddingVector(values=(1.0, math.inf), dim=2, provider_id='p', model_id='m')


def test_mean_pool_averages_componentwise() -> None:
    vectors = load_vectors()
    first = vectors.EmbeddingVector.from_array([1.0, 0.0], 'p', 'm')
    second = vectors.EmbeddingVector.from_array([0.0, 1.0], 'p', 'm')

    pooled = vectors.mean_pool([first, second])
    weighted = vectors.mean_pool([first, second], weights=[3, 1])

    assert pooled.values == (0.5, 0.5)
    assert weighted.values == (0.75, 0.25)
    assert vectors.mean_pool([first]) is first


def test_mean_pool_rejects_mixed_inputs() -> None:
    vectors = load_vectors()
    first = vectors.EmbeddingVector.from_array([1.0, 0.0], 'p', 'm')

    with pytest.raises(vectors.EmbeddingError, match='dims'):
        vectors.mean_pool([first, vectors.EmbeddingVector.from_array([1.0, 0.0, 0.0], 'p', 'm')])
    with pytest.raises(vectors.EmbeddingError, match='different providers'):
        vectors.mean_pool([first, vectors.EmbeddingVector.from_array([1.0, 0.0], 'q', 'm')])
    with pytest.raises(vectors.EmbeddingError, match='empty'):
        vectors.mean_pool([])


def test_mean_pool_three_vectors_is_convex_and_order_free() -> None:
    vectors = load_vectors()
    inputs = [vectors.EmbeddingVector.from_array(values, 'p', 'm') for values in ([1.0, 2.0], [3.0, 4.0], [5.0, 6.0])]

    pooled = vectors.mean_pool(inputs)

    assert pooled.values == pytest.approx((3.0, 4.0))
    assert pooled.norm() <= max(vector.norm() for vector in inputs)
    assert vectors.mean_pool(list(reversed(inputs))).values == pytest.approx(pooled.values)
    assert vectors.mean_pool([inputs[1], inputs[2], inputs[0]]).values == pytest.approx(pooled.values)
    assert (pooled.provider_id, pooled.model_id) == ('p', 'm')


def test_deterministic_embed_is_stable_unit_norm_and_text_sensitive() -> None:
    vectors = load_vectors()

    first = vectors.deterministic_embed('loops repeat code', 64, 5)
    again = vectors.deterministic_embed('loops repeat code', 64, 5)
    other_seed = vectors.deterministic_embed('loops repeat code', 64, 6)
    other_text = vectors.deterministic_embed('loops repeat  code', 64, 5)

    assert first == again
    assert first.dim == 64
    assert first.norm() == pytest.approx(1.0, abs=1e-12)
    assert first.values != other_seed.values
    assert first.values != other_text.values


def test_deterministic_embed_rewards_shared_vocabulary() -> None:
    vectors = load_vectors()
    reference = vectors.deterministic_embed('for loop iterate list index range', 256, 0).as_array()
    related = vectors.deterministic_embed('iterate list with for loop and range', 256, 0).as_array()
    unrelated = vectors.deterministic_embed('yeast flour oven crust knead dough', 256, 0).as_array()

    assert float(np.dot(reference, related)) > float(np.dot(reference, unrelated)) + 0.3


def test_deterministic_embed_requires_dimension_two() -> None:
    vectors = load_vectors()

    with pytest.raises(vectors.EmbeddingError, match='dim >= 2'):
        vectors.deterministic_embed('text', 1, 0)
