//! Video ingestion and sample preparation: loading, resizing, cropping,
//! temporal-stride augmentation and 5-frame windowing.

mod frames;
mod manifest;
mod resample;
mod stacks;

pub use frames::{
    image_to_gray, list_frame_files, load_frames, to_u8, write_frame_dir, FrameSequence, GrayFrame,
    RawSidecar, LUMA_601,
};
pub use manifest::{Manifest, ManifestEntry, Role};
pub use resample::{
    draw_crop_offset, half_resize, half_resize_crop_stacks, half_resize_random_crop, resize,
    resize_frame,
};
pub use stacks::{
    stride_phases, temporal_augment, window_stacks, FrameStack, StackOrigin, STACK_FRAMES,
    STACK_SIZE,
};
