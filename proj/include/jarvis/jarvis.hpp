#pragma once

// Umbrella header for the whole library.

#include "jarvis/text.hpp"
#include "jarvis/router.hpp"
#include "jarvis/embedder.hpp"
#include "jarvis/vector_index.hpp"
#include "jarvis/ingest.hpp"
#include "jarvis/memory_store.hpp"
#include "jarvis/llm.hpp"
#include "jarvis/remote.hpp"
#include "jarvis/pipelines.hpp"
#include "jarvis/benchmark.hpp"
#include "jarvis/config.hpp"
#include "jarvis/service.hpp"
