"""Matrix concentration inequalities via exchangeable pairs."""
