#pragma once

#include <naptron/binary_pattern.hpp>
#include <naptron/box.hpp>
#include <naptron/error.hpp>
#include <naptron/extraction.hpp>
#include <naptron/io/dataset.hpp>
#include <naptron/io/store_file.hpp>
#include <naptron/labeling.hpp>
#include <naptron/metrics.hpp>
#include <naptron/pattern_store.hpp>
#include <naptron/pipeline.hpp>
#include <naptron/records.hpp>
#include <naptron/scoring.hpp>
#include <naptron/synthgen.hpp>
