"""Ready-made client populations for experiments."""

from .synthetic import CsbmParams, generate_csbm

# (p_in, p_out) pairs for two balanced classes at n = 300: expected
# adjusted homophily is (p_in - p_out) / (p_in + p_out)
HOMOPHILIC = (0.032, 0.008)
HETEROPHILIC = (0.0105, 0.0195)


def mixed_homophily_clients(seed, n=300, d=16, mu=1.0, sigma_f=1.0, n_homophilic=3,
                            n_heterophilic=3):
    """cSBM client graphs, the first ``n_homophilic`` assortative, the rest disassortative.

    All clients share class means, so they agree on the feature-to-label
    map while differing in how labels sit on their edges.
    """
    graphs = []
    for i in range(n_homophilic + n_heterophilic):
        p_in, p_out = HOMOPHILIC if i < n_homophilic else HETEROPHILIC
        params = CsbmParams(n=n, c=2, d=d, p_in=p_in, p_out=p_out, mu=mu, sigma_f=sigma_f,
                            seed=seed * 1000 + i)
        graphs.append(generate_csbm(params))
    return graphs
