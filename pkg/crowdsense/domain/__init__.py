"""Domain objects shared by the services: points, posts, clusterings, symbols, traces and scores."""
