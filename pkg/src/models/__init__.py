"""Network definitions: layers, subspace attention, NBNet, presets and cost accounting."""
