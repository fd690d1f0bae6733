#pragma once

// Umbrella header for the NeuEdit desk-scale video editing library.

#include "neuedit/codec.hpp"
#include "neuedit/common.hpp"
#include "neuedit/denoiser.hpp"
#include "neuedit/diffusion.hpp"
#include "neuedit/embeddings.hpp"
#include "neuedit/io.hpp"
#include "neuedit/matrix.hpp"
#include "neuedit/metrics.hpp"
#include "neuedit/neutral_text.hpp"
#include "neuedit/neutral_video.hpp"
#include "neuedit/pipeline.hpp"
#include "neuedit/schedule.hpp"
#include "neuedit/video.hpp"
#include "neuedit/world.hpp"
