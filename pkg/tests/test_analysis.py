import numpy as np
import pytest

from soundfault import analysis
from soundfault.errors import ConfigurationError, NumericError, ShapeError


def _tensor(weights, grid=(2, 2), pitch=(16, 16), n_special=2):
    return analysis.AttentionTensor(
        weights=np.asarray(weights, dtype=np.float64),
        grid=grid,
        patch_pitch=pitch,
        n_special=n_special,
    )


def _uniform_attention(heads, grid, n_special=2):
    tokens = n_special + grid[0] * grid[1]
    return np.full((heads, tokens, tokens), 1.0 / tokens)


# ------------------------------------------------------ attention distance

def test_identity_attention_zero_distance():
    # each patch attends only to itself -> expected travel distance 0
    weights = np.eye(6)[None, :, :]
    attn = _tensor(weights)
    np.testing.assert_allclose(analysis.mean_attention_distance(attn), [0.0])


def test_uniform_attention_matches_enumeration():
    # 2x2 grid, pitch 16: centers (0,0) (0,16) (16,0) (16,16)
    attn = _tensor(_uniform_attention(1, (2, 2)))
    d = 16.0
    diag = 16.0 * np.sqrt(2.0)
    # after dropping special tokens each row renormalizes to uniform 1/4;
    # every query sees distances {0, 16, 16, 16*sqrt(2)}
    expected = (0.0 + d + d + diag) / 4.0
    np.testing.assert_allclose(analysis.mean_attention_distance(attn), [expected])


def test_one_hot_neighbor_attention():
    # every patch row puts all mass on the horizontally adjacent patch
    tokens = 6
    w = np.zeros((1, tokens, tokens))
    w[0, :2, 0] = 1.0  # special rows: anywhere, they are dropped
    pairs = {2: 3, 3: 2, 4: 5, 5: 4}
    for q, t in pairs.items():
        w[0, q, t] = 1.0
    attn = _tensor(w, grid=(2, 2), pitch=(16, 16))
    np.testing.assert_allclose(analysis.mean_attention_distance(attn), [16.0])


def test_distance_scales_with_pitch():
    base = _tensor(_uniform_attention(2, (3, 3), n_special=1), grid=(3, 3),
                   pitch=(10, 10), n_special=1)
    doubled = _tensor(_uniform_attention(2, (3, 3), n_special=1), grid=(3, 3),
                      pitch=(20, 20), n_special=1)
    np.testing.assert_allclose(
        analysis.mean_attention_distance(doubled),
        2.0 * analysis.mean_attention_distance(base),
        rtol=1e-12,
    )


def test_head_permutation_invariance(rng):
    w = rng.random((4, 6, 6))
    w /= w.sum(axis=2, keepdims=True)
    attn = _tensor(w)
    perm = [2, 0, 3, 1]
    attn_perm = _tensor(w[perm])
    np.testing.assert_allclose(
        analysis.mean_attention_distance(attn_perm),
        analysis.mean_attention_distance(attn)[perm],
    )


def test_distance_bounds(rng):
    w = rng.random((3, 11, 11))
    w /= w.sum(axis=2, keepdims=True)
    attn = _tensor(w, grid=(3, 3), pitch=(16, 16))
    max_dist = np.sqrt(2.0) * 2 * 16.0  # opposite grid corners
    d = analysis.mean_attention_distance(attn)
    assert np.all(d >= 0.0)
    assert np.all(d <= max_dist)


def test_non_stochastic_rows_rejected():
    w = np.full((1, 6, 6), 0.3)
    with pytest.raises(NumericError):
        analysis.mean_attention_distance(_tensor(w))


def test_token_count_mismatch_rejected():
    with pytest.raises(ShapeError):
        _tensor(np.eye(7)[None, :, :])  # 2 special + 2x2 patches needs 6


def test_non_square_weights_rejected():
    with pytest.raises(ShapeError):
        _tensor(np.zeros((1, 6, 5)))


def test_attention_file_round_trip(rng):
    w = rng.random((2, 6, 6)).astype(np.float32).astype(np.float64)
    w /= w.sum(axis=2, keepdims=True)
    attn = analysis.AttentionTensor(
        weights=w, grid=(2, 2), patch_pitch=(16.0, 16.0), n_special=2,
        label="layer_03",
    )
    payload = analysis.attention_to_bytes(attn)
    meta = {str(k): str(v) for k, v in analysis.attention_meta(attn).items()}
    back = analysis.attention_from_bytes(payload, meta)
    np.testing.assert_allclose(back.weights, attn.weights, atol=1e-7)
    assert back.grid == attn.grid
    assert back.n_special == 2
    assert back.label == "layer_03"


def test_patch_centers_row_major():
    centers = analysis.patch_centers((2, 3), (10, 4))
    np.testing.assert_array_equal(
        centers,
        [[0, 0], [0, 4], [0, 8], [10, 0], [10, 4], [10, 8]],
    )


# ------------------------------------------------------------------- t-SNE

def test_joint_probabilities_symmetric_and_normalized(rng):
    x = rng.normal(0, 1, (40, 5))
    p = analysis.joint_probabilities(x, perplexity=10.0)
    np.testing.assert_allclose(p, p.T, atol=1e-15)
    assert abs(p.sum() - 1.0) < 1e-9
    assert np.all(p > 0)


def test_conditional_entropy_matches_perplexity(rng):
    x = rng.normal(0, 1, (30, 4))
    from soundfault._kernels import pairwise_minkowski

    sq = pairwise_minkowski(x, x, 2.0) ** 2
    perplexity = 8.0
    p_cond = analysis._conditional_probs(sq, perplexity)
    for i in range(30):
        row = p_cond[i][p_cond[i] > 0]
        entropy = -np.sum(row * np.log(row))
        assert abs(entropy - np.log(perplexity)) < 1e-4


def test_joint_probabilities_rotation_invariant(rng):
    x = rng.normal(0, 1, (25, 3))
    q, _ = np.linalg.qr(rng.normal(0, 1, (3, 3)))
    p_a = analysis.joint_probabilities(x, 8.0)
    p_b = analysis.joint_probabilities(x @ q.T, 8.0)
    np.testing.assert_allclose(p_a, p_b, atol=1e-9)


def test_coincident_points_do_not_crash():
    x = np.zeros((10, 3))
    coords, kl = analysis.tsne(x, analysis.TsneConfig(perplexity=3.0, iterations=20))
    assert coords.shape == (10, 2)
    assert np.all(np.isfinite(coords))
    assert np.all(np.isfinite(kl))


def test_three_clusters_recovered(rng):
    centers = np.array([[0.0, 0.0], [30.0, 0.0], [0.0, 30.0]])
    points, truth = [], []
    for label, c in enumerate(centers):
        points.append(rng.normal(0, 1.0, (25, 2)) + c)
        truth.extend([label] * 25)
    x = np.vstack(points)
    truth = np.array(truth)
    coords, kl = analysis.tsne(
        x, analysis.TsneConfig(perplexity=15.0, iterations=400, seed=0)
    )
    # nearest-centroid agreement in the embedding
    correct = 0
    emb_centers = np.stack([coords[truth == l].mean(axis=0) for l in range(3)])
    for i in range(75):
        nearest = np.argmin(np.linalg.norm(coords[i] - emb_centers, axis=1))
        correct += int(nearest == truth[i])
    assert correct / 75 >= 0.95
    assert kl[-1] < kl[0]


def test_kl_improves_after_exaggeration(rng):
    x = rng.normal(0, 1, (40, 4))
    cfg = analysis.TsneConfig(perplexity=10.0, iterations=400,
                              exaggeration_iters=100, seed=1)
    _, kl = analysis.tsne(x, cfg)
    assert kl[-1] < kl[99]
    assert np.all(np.isfinite(kl))


def test_tsne_deterministic(rng):
    x = rng.normal(0, 1, (20, 3))
    cfg = analysis.TsneConfig(perplexity=5.0, iterations=50, seed=4)
    a, _ = analysis.tsne(x, cfg)
    b, _ = analysis.tsne(x, cfg)
    np.testing.assert_array_equal(a, b)


def test_tsne_output_centered(rng):
    x = rng.normal(0, 1, (15, 3))
    coords, _ = analysis.tsne(x, analysis.TsneConfig(perplexity=5.0, iterations=30))
    np.testing.assert_allclose(coords.mean(axis=0), 0.0, atol=1e-9)


def test_tsne_perplexity_too_large(rng):
    with pytest.raises(ConfigurationError):
        analysis.tsne(rng.normal(0, 1, (8, 3)),
                      analysis.TsneConfig(perplexity=8.0, iterations=10))


def test_tsne_too_few_points(rng):
    with pytest.raises(ConfigurationError):
        analysis.tsne(rng.normal(0, 1, (3, 3)))


def test_tsne_config_validation():
    with pytest.raises(ConfigurationError):
        analysis.TsneConfig(perplexity=1.0)
    with pytest.raises(ConfigurationError):
        analysis.TsneConfig(iterations=0)
