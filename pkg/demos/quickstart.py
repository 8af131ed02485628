"""Learn a Gaussian from clean, noisy and corrupted samples.

    python3 demos/quickstart.py
"""

from compresslearn.compression import Gaussian1DFamily, UniformBoxFamily
from compresslearn.densities import GaussianNoise, IsoGaussian, SeededRng, UniformBox, convolve_noise, distance, draw_samples
from compresslearn.robust import (
    AdversaryBudget,
    AdversaryStrategy,
    corrupt_adversarial,
    learn_adversarial,
    learn_clean,
    learn_noisy,
    moment_fit,
)

rng = SeededRng(2024)

# clean samples
truth = IsoGaussian([1.5], 0.8)
x = draw_samples(truth, 5000, rng.child(0))
fit = learn_clean(x, Gaussian1DFamily(), 0.2, 0.1, rng.child(1))
print(f"clean:       chose {fit.density}, TV {distance(fit.density, truth).value:.4f}, {fit.candidate_count} candidates")

# samples blurred by Gaussian noise of known scale
box = UniformBox([0.0], [1.3], 1.0)
noise = GaussianNoise(0.2)
y = draw_samples(convolve_noise(box, noise), 4000, rng.child(2))
fit = learn_noisy(y, UniformBoxFamily(1, 1.0), noise, 0.15, 0.1, rng.child(3), cap=200)
print(f"noisy:       chose {fit.density}, TV {distance(fit.density, box).value:.4f}")

# two rows moved far away by an adversary
truth = IsoGaussian([0.0], 1.0)
x = draw_samples(truth, 900, rng.child(4))
rec = corrupt_adversarial(x, AdversaryBudget(2, 50.0), AdversaryStrategy("DecoyCluster"), rng=rng.child(5))
fit = learn_adversarial(rec.samples, 2, Gaussian1DFamily(), 50.0, 0.45, 0.1, rng.child(6), cap=1000)
naive = moment_fit(rec.samples)
print(f"adversarial: robust TV {distance(fit.density, truth).value:.4f}, moment fit TV {distance(naive, truth).value:.4f}")
